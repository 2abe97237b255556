"""Verifiable searchable symmetric encryption.

Two schemes share one toolkit:

* :mod:`vdsse.static` wraps a static index and appends a per-keyword tag,
  which only the key holder can check.
* :mod:`vdsse.forward` adds a BLS signature table to a forward-private index
  so that anyone with the public key can audit a search, and handles
  deletions with a twin structure.

:mod:`vdsse.sim` runs owner, cloud and auditor as separate roles, and
:mod:`vdsse.cli` persists everything in a role-separated store.
"""

from .errors import (
    CollisionError,
    DecodeError,
    IncompleteIndexError,
    OwnerStateError,
    ProofUnavailableError,
    ProtocolError,
    StoreError,
    VsseError,
)
from .forward import (
    ADD,
    DEL,
    ForwardCloud,
    ForwardOwnerState,
    ForwardVKeys,
    SearchProof,
    SignatureTable,
    forward_setup,
    vf_audit,
    vf_build,
    vf_cloud_search,
    vf_keygen,
    vf_owner_proof,
    vf_search_token,
    vf_search_with_deletions,
    vf_update_token,
)
from .sse import EncryptedIndex
from .static import StaticVKeys, vs_build, vs_keygen, vs_search, vs_verify

__version__ = "0.1.0"

__all__ = [
    "ADD",
    "DEL",
    "CollisionError",
    "DecodeError",
    "EncryptedIndex",
    "ForwardCloud",
    "ForwardOwnerState",
    "ForwardVKeys",
    "IncompleteIndexError",
    "OwnerStateError",
    "ProofUnavailableError",
    "ProtocolError",
    "SearchProof",
    "SignatureTable",
    "StaticVKeys",
    "StoreError",
    "VsseError",
    "forward_setup",
    "vf_audit",
    "vf_build",
    "vf_cloud_search",
    "vf_keygen",
    "vf_owner_proof",
    "vf_search_token",
    "vf_search_with_deletions",
    "vf_update_token",
    "vs_build",
    "vs_keygen",
    "vs_search",
    "vs_verify",
]
