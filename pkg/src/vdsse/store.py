"""Role-separated on-disk store.

Layout under the store root::

    owner/keys        secret key material (BLS sk, PRF masters, static keys)
    owner/state       per-keyword chain states of both structures, static counts
    cloud/static.idx  static index (ids plus one tag per keyword)
    cloud/add.idx     forward index          cloud/add.sig  its signature table
    cloud/del.idx     deletion twin index    cloud/del.sig  its signature table
    auditor/pk        the BLS public key, nothing else

Every file starts with a 4-byte magic and a 1-byte format version.  A lock
file at the root serialises CLI invocations.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from filelock import FileLock, Timeout

from .crypto import (
    G2_BYTES,
    LAMBDA_BYTES,
    SCALAR_BYTES,
    BlsKeyPair,
    G2Element,
    decode_g2,
    decode_scalar,
    encode_g2,
    encode_scalar,
)
from .errors import DecodeError, StoreError
from .forward import (
    ADD,
    DEL,
    CloudStructure,
    ForwardCloud,
    ForwardOwnerState,
    ForwardVKeys,
    SignatureTable,
)
from .sse import EncryptedIndex, KeywordState
from .static import StaticVKeys

FORMAT_VERSION = 1
KEYS_MAGIC = b"VKEY"
STATE_MAGIC = b"VOST"
PK_MAGIC = b"VPUB"

OWNER_DIR, CLOUD_DIR, AUDITOR_DIR = "owner", "cloud", "auditor"
KEYS_FILE = f"{OWNER_DIR}/keys"
STATE_FILE = f"{OWNER_DIR}/state"
PK_FILE = f"{AUDITOR_DIR}/pk"
STATIC_INDEX_FILE = f"{CLOUD_DIR}/static.idx"
INDEX_FILES = {ADD: f"{CLOUD_DIR}/add.idx", DEL: f"{CLOUD_DIR}/del.idx"}
TSIG_FILES = {ADD: f"{CLOUD_DIR}/add.sig", DEL: f"{CLOUD_DIR}/del.sig"}
LOCK_FILE = ".lock"

_KEYS_BODY = SCALAR_BYTES + 4 * LAMBDA_BYTES


def _header(magic: bytes) -> bytes:
    return magic + bytes([FORMAT_VERSION])


def _strip_header(data: bytes, magic: bytes, what: str) -> bytes:
    if data[:4] != magic:
        raise DecodeError(f"{what}: bad magic")
    if data[4:5] != bytes([FORMAT_VERSION]):
        raise DecodeError(f"{what}: unsupported format version")
    return data[5:]


@dataclass(frozen=True)
class StoreKeys:
    forward: ForwardVKeys
    static: StaticVKeys

    def to_bytes(self) -> bytes:
        f, s = self.forward, self.static
        return _header(KEYS_MAGIC) + b"".join(
            [encode_scalar(f.bls.sk), f.seed_master, f.tag_master, s.base_key, s.tag_master]
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "StoreKeys":
        body = _strip_header(data, KEYS_MAGIC, "key file")
        if len(body) != _KEYS_BODY:
            raise DecodeError("key file: wrong length")
        sk = decode_scalar(body[:SCALAR_BYTES])
        if sk < 2:
            raise DecodeError("key file: degenerate secret key")
        rest = [body[SCALAR_BYTES + j * LAMBDA_BYTES : SCALAR_BYTES + (j + 1) * LAMBDA_BYTES] for j in range(4)]
        fwd = ForwardVKeys(BlsKeyPair.from_secret(sk), rest[0], rest[1])
        return cls(fwd, StaticVKeys(rest[2], rest[3]))


@dataclass
class OwnerState:
    """Everything the owner remembers between invocations.

    ``built`` flips once a corpus has been loaded; ``updates`` counts applied
    update batches (the static index does not see them).
    """

    forward: ForwardOwnerState = field(default_factory=ForwardOwnerState)
    static_counts: dict[str, int] = field(default_factory=dict)
    built: bool = False
    updates: int = 0

    def to_bytes(self) -> bytes:
        def states(d: dict[str, KeywordState]) -> dict:
            return {w: [st.counter, st.head.hex()] for w, st in sorted(d.items())}

        body = {
            "built": self.built,
            "updates": self.updates,
            ADD: states(self.forward.add),
            DEL: states(self.forward.deleted),
            "static": dict(sorted(self.static_counts.items())),
        }
        return _header(STATE_MAGIC) + json.dumps(body, separators=(",", ":")).encode()

    @classmethod
    def from_bytes(cls, data: bytes) -> "OwnerState":
        body = _strip_header(data, STATE_MAGIC, "owner state")
        try:
            d = json.loads(body)

            def states(raw: dict) -> dict[str, KeywordState]:
                out = {}
                for w, (counter, head) in raw.items():
                    head = bytes.fromhex(head)
                    if not isinstance(counter, int) or len(head) != LAMBDA_BYTES:
                        raise ValueError(f"bad state for {w!r}")
                    out[w] = KeywordState(counter, head)
                return out

            fwd = ForwardOwnerState(add=states(d[ADD]), deleted=states(d[DEL]))
            counts = {w: int(c) for w, c in d["static"].items()}
            if any(c < 0 for c in counts.values()):
                raise ValueError("negative static count")
            return cls(fwd, counts, bool(d["built"]), int(d["updates"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise DecodeError(f"owner state: {exc}") from exc


def encode_pk(pk: G2Element) -> bytes:
    return _header(PK_MAGIC) + encode_g2(pk)


def decode_pk(data: bytes) -> G2Element:
    body = _strip_header(data, PK_MAGIC, "public key file")
    if len(body) != G2_BYTES:
        raise DecodeError("public key file: wrong length")
    return decode_g2(body)


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class Store:
    """Handle on a store directory. Loading and saving go through here."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path(self, rel: str) -> Path:
        return self.root / rel

    def exists(self) -> bool:
        return self.path(KEYS_FILE).is_file()

    @contextmanager
    def locked(self, timeout: float = 10.0) -> Iterator["Store"]:
        lock = FileLock(str(self.path(LOCK_FILE)))
        try:
            lock.acquire(timeout=timeout)
        except Timeout:
            raise StoreError(f"store {self.root} is locked by another process") from None
        try:
            yield self
        finally:
            lock.release()

    # -- raw file access ----------------------------------------------------

    def _read(self, rel: str) -> bytes:
        try:
            return self.path(rel).read_bytes()
        except FileNotFoundError:
            raise StoreError(f"missing store file {rel}") from None

    def _decode(self, rel: str, decoder):
        try:
            return decoder(self._read(rel))
        except DecodeError as exc:
            raise StoreError(f"corrupt store file {rel}: {exc}") from exc

    def _write(self, rel: str, data: bytes) -> None:
        _write_atomic(self.path(rel), data)

    # -- role views ---------------------------------------------------------

    def load_keys(self) -> StoreKeys:
        keys = self._decode(KEYS_FILE, StoreKeys.from_bytes)
        if self.load_pk() != keys.forward.pk:
            raise StoreError("auditor public key does not match the owner key")
        return keys

    def load_owner_state(self) -> OwnerState:
        return self._decode(STATE_FILE, OwnerState.from_bytes)

    def load_pk(self) -> G2Element:
        return self._decode(PK_FILE, decode_pk)

    def load_static_index(self) -> EncryptedIndex:
        return self._decode(STATIC_INDEX_FILE, EncryptedIndex.from_bytes)

    def load_cloud(self) -> ForwardCloud:
        parts = {
            name: CloudStructure(
                self._decode(INDEX_FILES[name], EncryptedIndex.from_bytes),
                self._decode(TSIG_FILES[name], SignatureTable.from_bytes),
            )
            for name in (ADD, DEL)
        }
        return ForwardCloud(add=parts[ADD], deleted=parts[DEL])

    def save_keys(self, keys: StoreKeys) -> None:
        self._write(KEYS_FILE, keys.to_bytes())
        self._write(PK_FILE, encode_pk(keys.forward.pk))

    def save_owner_state(self, state: OwnerState) -> None:
        self._write(STATE_FILE, state.to_bytes())

    def save_static_index(self, index: EncryptedIndex) -> None:
        self._write(STATIC_INDEX_FILE, index.to_bytes())

    def save_cloud(self, cloud: ForwardCloud) -> None:
        for name in (ADD, DEL):
            s = cloud.structure(name)
            self._write(INDEX_FILES[name], s.index.to_bytes())
            self._write(TSIG_FILES[name], s.tsig.to_bytes())

    # -- lifecycle ----------------------------------------------------------

    def initialise(self, keys: StoreKeys, force: bool = False) -> None:
        """Create all three role subtrees with an empty corpus."""
        if self.root.exists() and any(f.name != LOCK_FILE for f in self.root.iterdir()) and not force:
            raise StoreError(f"{self.root} exists and is not empty (use --force)")
        for d in (OWNER_DIR, CLOUD_DIR, AUDITOR_DIR):
            self.path(d).mkdir(parents=True, exist_ok=True)
        # a forced rerun must not leave stale files from an older layout
        for d in (OWNER_DIR, CLOUD_DIR, AUDITOR_DIR):
            for f in self.path(d).iterdir():
                if f.is_file():
                    f.unlink()
        self.save_keys(keys)
        self.save_owner_state(OwnerState())
        self.save_static_index(EncryptedIndex())
        self.save_cloud(ForwardCloud())


def file_summary(store: Store) -> dict[str, int]:
    """Byte size of each role file, for reports."""
    out = {}
    for rel in (KEYS_FILE, STATE_FILE, PK_FILE, STATIC_INDEX_FILE, *INDEX_FILES.values(), *TSIG_FILES.values()):
        p = store.path(rel)
        out[rel] = p.stat().st_size if p.exists() else -1
    return out
