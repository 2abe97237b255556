"""Embedded SSE backends.

Two concrete schemes sit behind the transforms:

* a static encrypted inverted index, one PRF-addressed slot per posting;
* a hash-chain forward-private dynamic scheme.  Every add draws a fresh chain
  state, so an update token is independent of every search token issued
  before it.  Searching hands the cloud the chain head, and it walks back
  ``count`` links.

Keywords are ``str`` (UTF-8, 1..256 bytes); document identifiers are 16-byte
``bytes``.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Protocol, Sequence

from .crypto import (
    LAMBDA_BYTES,
    Q,
    TAG_CHAIN,
    TAG_LOC,
    TAG_MASK,
    Rng,
    default_rng,
    prf,
    tagged_hash,
)
from .errors import CollisionError, DecodeError, IncompleteIndexError

DOC_ID_BYTES = 16
MAX_KEYWORD_BYTES = 256
SLOT_BYTES = 32
ZERO_HEAD = bytes(LAMBDA_BYTES)

PlainDb = Mapping[str, Sequence[bytes]]

assert 8 * DOC_ID_BYTES < Q.bit_length()


def keyword_bytes(w: str) -> bytes:
    raw = w.encode("utf-8")
    if not 1 <= len(raw) <= MAX_KEYWORD_BYTES:
        raise ValueError(f"keyword must be 1..{MAX_KEYWORD_BYTES} UTF-8 bytes: {w!r}")
    return raw


def check_doc_id(doc_id: bytes) -> bytes:
    if not isinstance(doc_id, (bytes, bytearray)) or len(doc_id) != DOC_ID_BYTES:
        raise ValueError(f"document id must be {DOC_ID_BYTES} bytes")
    return bytes(doc_id)


def id_scalar(doc_id: bytes) -> int:
    """Injective embedding of a document id into Z_q."""
    return int.from_bytes(check_doc_id(doc_id), "big")


def random_doc_id(rng: Rng | None = None) -> bytes:
    return (rng or default_rng()).randbytes(DOC_ID_BYTES)


def validate_db(db: PlainDb) -> None:
    for w, ids in db.items():
        keyword_bytes(w)
        for doc_id in ids:
            check_doc_id(doc_id)
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate document id under keyword {w!r}")


def inverted_oracle(pairs: Iterable[tuple[str, bytes]]) -> dict[str, list[bytes]]:
    """Plaintext inverted index in insertion order."""
    out: dict[str, list[bytes]] = {}
    for w, doc_id in pairs:
        out.setdefault(w, []).append(doc_id)
    return out


def xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b, strict=True))


def _counter(i: int) -> bytes:
    return i.to_bytes(8, "big")


# -- encrypted index --------------------------------------------------------

INDEX_MAGIC = b"VIDX"
FORMAT_VERSION = 1


class EncryptedIndex:
    """Cloud-side dictionary from 32-byte locations to opaque values."""

    def __init__(self, table: Mapping[bytes, bytes] | None = None):
        self._table: dict[bytes, bytes] = dict(table or {})
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, loc: bytes) -> bool:
        return loc in self._table

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EncryptedIndex) and self._table == other._table

    def get(self, loc: bytes) -> bytes | None:
        return self._table.get(loc)

    def items(self) -> Iterator[tuple[bytes, bytes]]:
        return iter(self._table.items())

    def insert(self, loc: bytes, value: bytes) -> None:
        if len(loc) != 32:
            raise ValueError("location must be 32 bytes")
        with self._lock:
            if loc in self._table:
                raise CollisionError(f"location {loc.hex()[:16]}... already stored")
            self._table[loc] = value

    def to_bytes(self) -> bytes:
        """Flat records: 32-byte location, 2-byte big-endian length, value."""
        parts = [INDEX_MAGIC, bytes([FORMAT_VERSION])]
        for loc, value in self._table.items():
            parts += [loc, struct.pack(">H", len(value)), value]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncryptedIndex":
        if data[:4] != INDEX_MAGIC or data[4:5] != bytes([FORMAT_VERSION]):
            raise DecodeError("bad index header")
        index = cls()
        pos = 5
        while pos < len(data):
            if pos + 34 > len(data):
                raise DecodeError("truncated index record")
            loc = data[pos : pos + 32]
            (n,) = struct.unpack(">H", data[pos + 32 : pos + 34])
            value = data[pos + 34 : pos + 34 + n]
            if len(value) != n:
                raise DecodeError("truncated index value")
            try:
                index.insert(loc, value)
            except CollisionError as exc:
                raise DecodeError(str(exc)) from exc
            pos += 34 + n
        return index


# -- static scheme ------------------------------------------------------------


@dataclass(frozen=True)
class StaticToken:
    k1: bytes
    k2: bytes
    count: int


def _static_keys(key: bytes, w: str) -> tuple[bytes, bytes]:
    kw = keyword_bytes(w)
    return prf(key, b"k1\x00" + kw), prf(key, b"k2\x00" + kw)


def _to_slot(entry: bytes) -> bytes:
    if len(entry) == DOC_ID_BYTES:
        return entry + bytes(SLOT_BYTES - DOC_ID_BYTES)
    if len(entry) == SLOT_BYTES:
        return entry
    raise ValueError(f"posting must be {DOC_ID_BYTES} or {SLOT_BYTES} bytes")


def static_build(
    key: bytes, db: Mapping[str, Sequence[bytes]], rng: Rng | None = None
) -> EncryptedIndex:
    """Encrypt every posting into its own slot.

    Postings are 16-byte ids or 32-byte opaque blocks (the static transform
    appends its tag as one).  Insertion order is shuffled so the table's
    layout says nothing about which slots share a keyword.
    """
    rng = rng or default_rng()
    records = []
    for w, entries in db.items():
        k1, k2 = _static_keys(key, w)
        for i, entry in enumerate(entries, start=1):
            loc = prf(k1, _counter(i))
            records.append((loc, xor(_to_slot(entry), prf(k2, _counter(i)))))
    for j in range(len(records) - 1, 0, -1):
        k = rng.randrange(j + 1)
        records[j], records[k] = records[k], records[j]
    index = EncryptedIndex()
    for loc, value in records:
        index.insert(loc, value)
    return index


def static_search_token(key: bytes, w: str, counts: Mapping[str, int]) -> StaticToken:
    k1, k2 = _static_keys(key, w)
    return StaticToken(k1, k2, counts.get(w, 0))


def static_search_slots(index: EncryptedIndex, token: StaticToken) -> list[bytes]:
    """Decrypt the ``token.count`` slots of one keyword, in insertion order."""
    out = []
    for i in range(1, token.count + 1):
        value = index.get(prf(token.k1, _counter(i)))
        if value is None:
            raise IncompleteIndexError(f"static slot {i} of {token.count} missing")
        out.append(xor(value, prf(token.k2, _counter(i))))
    return out


def static_search(index: EncryptedIndex, token: StaticToken) -> list[bytes]:
    return [slot[:DOC_ID_BYTES] for slot in static_search_slots(index, token)]


# -- hash-chain forward-private scheme ------------------------------------------


@dataclass(frozen=True)
class KeywordState:
    counter: int = 0
    head: bytes = ZERO_HEAD

    def __post_init__(self):
        if (self.counter == 0) != (self.head == ZERO_HEAD):
            raise ValueError("counter is zero iff the chain head is the zero sentinel")


@dataclass(frozen=True)
class ChainToken:
    location: bytes
    value: bytes  # masked id (16) || masked previous head (32)


@dataclass(frozen=True)
class ChainSearchToken:
    head: bytes
    count: int


CHAIN_VALUE_BYTES = DOC_ID_BYTES + LAMBDA_BYTES


def _mask(st: bytes) -> bytes:
    return tagged_hash(TAG_MASK, st)[:DOC_ID_BYTES]


def chain_update_token(
    state: KeywordState, doc_id: bytes, rng: Rng | None = None
) -> tuple[ChainToken, KeywordState]:
    st_new = (rng or default_rng()).randbytes(LAMBDA_BYTES)
    while st_new == ZERO_HEAD:
        st_new = (rng or default_rng()).randbytes(LAMBDA_BYTES)
    value = xor(check_doc_id(doc_id), _mask(st_new)) + xor(
        state.head, tagged_hash(TAG_CHAIN, st_new)
    )
    token = ChainToken(tagged_hash(TAG_LOC, st_new), value)
    return token, KeywordState(state.counter + 1, st_new)


def chain_apply(index: EncryptedIndex, token: ChainToken) -> EncryptedIndex:
    index.insert(token.location, token.value)
    return index


def chain_search_token(state: KeywordState) -> ChainSearchToken:
    return ChainSearchToken(state.head, state.counter)


def chain_search(
    index: EncryptedIndex, token: ChainSearchToken
) -> list[tuple[bytes, int]]:
    """Walk back from the head; returns ``(id, insertion_index)`` ascending."""
    out = []
    st = token.head
    for depth in range(token.count):
        value = index.get(tagged_hash(TAG_LOC, st))
        if value is None or len(value) != CHAIN_VALUE_BYTES:
            raise IncompleteIndexError(
                f"chain link {depth + 1} of {token.count} missing"
            )
        doc_id = xor(value[:DOC_ID_BYTES], _mask(st))
        out.append((doc_id, token.count - depth))
        st = xor(value[DOC_ID_BYTES:], tagged_hash(TAG_CHAIN, st))
    out.reverse()
    return out


def chain_build(
    db: PlainDb, rng: Rng | None = None
) -> tuple[EncryptedIndex, dict[str, KeywordState]]:
    """Build by replaying every pair as an add; applies in shuffled order."""
    rng = rng or default_rng()
    validate_db(db)
    states: dict[str, KeywordState] = {}
    tokens = []
    for w, ids in db.items():
        st = KeywordState()
        for doc_id in ids:
            tok, st = chain_update_token(st, doc_id, rng)
            tokens.append(tok)
        states[w] = st
    for j in range(len(tokens) - 1, 0, -1):
        k = rng.randrange(j + 1)
        tokens[j], tokens[k] = tokens[k], tokens[j]
    index = EncryptedIndex()
    for tok in tokens:
        chain_apply(index, tok)
    return index, states


class ForwardBackend(Protocol):
    """What the forward transform needs from a forward-private scheme."""

    def update_token(
        self, state: KeywordState, doc_id: bytes, rng: Rng | None
    ) -> tuple[ChainToken, KeywordState]: ...

    def apply(self, index: EncryptedIndex, token: ChainToken) -> EncryptedIndex: ...

    def search_token(self, state: KeywordState) -> ChainSearchToken: ...

    def search(
        self, index: EncryptedIndex, token: ChainSearchToken
    ) -> list[tuple[bytes, int]]: ...


class HashChainBackend:
    update_token = staticmethod(chain_update_token)
    apply = staticmethod(chain_apply)
    search_token = staticmethod(chain_search_token)
    search = staticmethod(chain_search)


HASH_CHAIN = HashChainBackend()
