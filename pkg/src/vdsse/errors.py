"""Exception hierarchy shared by every layer of the package."""


class VsseError(Exception):
    """Base class for all errors raised by vdsse."""


class DecodeError(VsseError, ValueError):
    """Bytes do not decode to a valid scalar, group element or record."""


class CollisionError(VsseError):
    """A location or position key is already present in a cloud table."""


class IncompleteIndexError(VsseError):
    """A location the token requires is missing from the encrypted index."""


class ProofUnavailableError(VsseError):
    """The cloud has no signature stored at a position it must aggregate."""


class OwnerStateError(VsseError):
    """An owner-side precondition was violated (duplicate add, bad delete)."""


class ProtocolError(VsseError):
    """A role received a message it cannot accept in its current state."""


class StoreError(VsseError):
    """On-disk store is missing, locked, or corrupt."""
