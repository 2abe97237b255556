"""Forward-private, publicly verifiable dynamic SSE.

Beside the forward-private index the cloud keeps a signature table mapping
``pos = prf(tag_w, id || i)`` to ``sigma = g1^(sk * r_i * id)``, where
``r_i`` is the ``i``-th block of a PRG seeded per keyword.  A search proof has
two constant-size halves:

* the cloud multiplies the signatures at the positions of the ids it
  returns (``pf_c``);
* the owner recomputes ``m = sum(r_i * id_i) mod q`` from the ids it
  received (``pf_o``).

An auditor holding only ``pk`` accepts iff ``e(pf_c, g2) == e(g1^m, pk)``.

Deletions use a second, identical structure: a deleted pair is *added* to the
twin, both searches are audited, and the answer is the difference.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

from . import metrics
from .crypto import (
    G1_BYTES,
    Q,
    SCALAR_BYTES,
    BlsKeyPair,
    G1Element,
    G2Element,
    Rng,
    bls_gen,
    bls_sign,
    decode_g1,
    decode_scalar,
    default_rng,
    doc_name,
    encode_g1,
    encode_scalar,
    g1,
    g2,
    identity,
    pairing,
    prf,
    prg_block,
    random_key,
)
from .errors import (
    CollisionError,
    DecodeError,
    IncompleteIndexError,
    ProofUnavailableError,
    VsseError,
)
from .sse import (
    HASH_CHAIN,
    ChainSearchToken,
    ChainToken,
    EncryptedIndex,
    ForwardBackend,
    KeywordState,
    PlainDb,
    check_doc_id,
    id_scalar,
    keyword_bytes,
    validate_db,
)

ADD = "add"
DEL = "del"
STRUCTURES = (ADD, DEL)

_STRUCTURE_LABEL = {ADD: b"", DEL: b"del\x00"}

PROOF_BYTES = G1_BYTES + SCALAR_BYTES


class ResultRejected(VsseError):
    """A search result was refused; ``reason`` is the short verdict code."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class ForwardVKeys:
    bls: BlsKeyPair
    seed_master: bytes
    tag_master: bytes

    @property
    def pk(self) -> G2Element:
        return self.bls.pk


def vf_keygen(rng: Rng | None = None) -> ForwardVKeys:
    # the hash-chain backend draws chain states from rng and needs no key
    return ForwardVKeys(bls_gen(rng), random_key(rng), random_key(rng))


def _check_structure(structure: str) -> bytes:
    try:
        return _STRUCTURE_LABEL[structure]
    except KeyError:
        raise ValueError(f"structure must be one of {STRUCTURES}, got {structure!r}")


def keyword_tag(keys: ForwardVKeys, w: str, structure: str = ADD) -> bytes:
    return prf(keys.tag_master, _check_structure(structure) + keyword_bytes(w))


def keyword_seed(keys: ForwardVKeys, w: str, structure: str = ADD) -> bytes:
    return prf(keys.seed_master, _check_structure(structure) + keyword_bytes(w))


def position(tag: bytes, doc_id: bytes, i: int) -> bytes:
    return prf(tag, check_doc_id(doc_id) + i.to_bytes(8, "big"))


def pair_message(seed: bytes, doc_id: bytes, i: int) -> int:
    return prg_block(seed, i) * id_scalar(doc_id) % Q


# -- cloud structures -------------------------------------------------------

TSIG_MAGIC = b"VSIG"
FORMAT_VERSION = 1


class SignatureTable:
    """Position -> signature map held by the cloud."""

    def __init__(self) -> None:
        self._entries: dict[bytes, G1Element] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, pos: bytes) -> bool:
        return pos in self._entries

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SignatureTable) and self.to_bytes() == other.to_bytes()

    def get(self, pos: bytes) -> G1Element | None:
        return self._entries.get(pos)

    def items(self) -> Iterator[tuple[bytes, G1Element]]:
        return iter(self._entries.items())

    def insert(self, pos: bytes, sigma: G1Element) -> None:
        if len(pos) != 32:
            raise ValueError("position must be 32 bytes")
        if pos in self._entries:
            raise CollisionError(f"position {pos.hex()[:16]}... already stored")
        self._entries[pos] = sigma

    def to_bytes(self) -> bytes:
        parts = [TSIG_MAGIC, bytes([FORMAT_VERSION])]
        for pos, sigma in self._entries.items():
            parts += [pos, encode_g1(sigma)]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignatureTable":
        if data[:4] != TSIG_MAGIC or data[4:5] != bytes([FORMAT_VERSION]):
            raise DecodeError("bad signature-table header")
        body = data[5:]
        width = 32 + G1_BYTES
        if len(body) % width:
            raise DecodeError("truncated signature-table record")
        table = cls()
        for off in range(0, len(body), width):
            try:
                table.insert(body[off : off + 32], decode_g1(body[off + 32 : off + width]))
            except CollisionError as exc:
                raise DecodeError(str(exc)) from exc
        return table


@dataclass
class CloudStructure:
    index: EncryptedIndex = field(default_factory=EncryptedIndex)
    tsig: SignatureTable = field(default_factory=SignatureTable)


@dataclass
class ForwardCloud:
    """Primary (add) structure plus its deletion twin."""

    add: CloudStructure = field(default_factory=CloudStructure)
    deleted: CloudStructure = field(default_factory=CloudStructure)

    def structure(self, name: str) -> CloudStructure:
        _check_structure(name)
        return self.add if name == ADD else self.deleted


@dataclass
class ForwardOwnerState:
    """Per-keyword chain states for both structures. O(|W|) words."""

    add: dict[str, KeywordState] = field(default_factory=dict)
    deleted: dict[str, KeywordState] = field(default_factory=dict)

    def states(self, name: str) -> dict[str, KeywordState]:
        _check_structure(name)
        return self.add if name == ADD else self.deleted

    def state(self, w: str, name: str = ADD) -> KeywordState:
        return self.states(name).get(w, KeywordState())

    def count(self, w: str, name: str = ADD) -> int:
        return self.state(w, name).counter


# -- proof ----------------------------------------------------------------


@dataclass(frozen=True)
class SearchProof:
    pf_c: G1Element
    pf_o: int

    def to_bytes(self) -> bytes:
        return encode_g1(self.pf_c) + encode_scalar(self.pf_o)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SearchProof":
        if len(data) != PROOF_BYTES:
            raise DecodeError(f"proof must be {PROOF_BYTES} bytes")
        return cls(decode_g1(data[:G1_BYTES]), decode_scalar(data[G1_BYTES:]))


# -- build ------------------------------------------------------------------


def _sign_pair(keys: ForwardVKeys, w: str, doc_id: bytes, i: int, structure: str):
    pos = position(keyword_tag(keys, w, structure), doc_id, i)
    m = pair_message(keyword_seed(keys, w, structure), doc_id, i)
    return pos, bls_sign(keys.bls.sk, m)


def vf_build(
    keys: ForwardVKeys,
    db: PlainDb,
    rng: Rng | None = None,
    backend: ForwardBackend = HASH_CHAIN,
) -> tuple[EncryptedIndex, SignatureTable, dict[str, KeywordState]]:
    rng = rng or default_rng()
    validate_db(db)
    tsig = SignatureTable()
    states: dict[str, KeywordState] = {}
    tokens: list[ChainToken] = []
    sigs = []
    for w, ids in db.items():
        st = KeywordState()
        for doc_id in ids:
            tok, st = backend.update_token(st, doc_id, rng)
            tokens.append(tok)
            sigs.append(_sign_pair(keys, w, doc_id, st.counter, ADD))
        states[w] = st
    for seq in (tokens, sigs):
        for j in range(len(seq) - 1, 0, -1):
            k = rng.randrange(j + 1)
            seq[j], seq[k] = seq[k], seq[j]
    index = EncryptedIndex()
    for tok in tokens:
        backend.apply(index, tok)
    for pos, sigma in sigs:
        tsig.insert(pos, sigma)
    return index, tsig, states


# -- search ----------------------------------------------------------------


def vf_search_token(
    keys: ForwardVKeys,
    w: str,
    state: KeywordState,
    structure: str = ADD,
    backend: ForwardBackend = HASH_CHAIN,
) -> tuple[ChainSearchToken, bytes]:
    """Backend token plus ``tag_w``. The PRG seed never leaves the owner."""
    return backend.search_token(state), keyword_tag(keys, w, structure)


def aggregate(sigmas: Sequence[G1Element]) -> G1Element:
    if not sigmas:
        return identity()
    acc = sigmas[0]
    for s in sigmas[1:]:
        metrics.tick(metrics.GROUP_MUL)
        acc = acc * s
    return acc


def vf_cloud_search(
    index: EncryptedIndex,
    tsig: SignatureTable,
    token: ChainSearchToken,
    tag: bytes,
    backend: ForwardBackend = HASH_CHAIN,
) -> tuple[list[tuple[bytes, int]], G1Element]:
    results = backend.search(index, token)
    sigmas = []
    for doc_id, i in results:
        metrics.tick(metrics.TSIG_LOOKUP)
        sigma = tsig.get(position(tag, doc_id, i))
        if sigma is None:
            raise ProofUnavailableError(f"no signature for result index {i}")
        sigmas.append(sigma)
    return results, aggregate(sigmas)


def vf_owner_proof(
    keys: ForwardVKeys,
    w: str,
    received: Sequence[tuple[bytes, int]],
    expected_count: int,
    structure: str = ADD,
) -> int:
    """Aggregate message ``sum(r_i * id_i) mod q`` over the received result.

    Raises :class:`ResultRejected` when the result cannot be the right size
    or its insertion indices are not exactly ``1..c_w``.  The index check
    blocks a cloud that repeats one pair and squares its signature.
    """
    if len(received) != expected_count:
        raise ResultRejected(
            "count-mismatch", f"expected {expected_count}, got {len(received)}"
        )
    if sorted(i for _, i in received) != list(range(1, expected_count + 1)):
        raise ResultRejected("index-mismatch")
    seed = keyword_seed(keys, w, structure)
    m = 0
    for doc_id, i in received:
        try:
            x = id_scalar(doc_id)
        except ValueError:
            raise ResultRejected("malformed", "bad document id") from None
        metrics.tick(metrics.SCALAR_MULADD)
        m = (m + prg_block(seed, i) * x) % Q
    return m


def vf_audit(pk: G2Element, pf_o: int | bytes, pf_c: G1Element | bytes) -> bool:
    """Two pairings, whatever the result size. Malformed input rejects."""
    try:
        if isinstance(pf_c, (bytes, bytearray)):
            pf_c = decode_g1(bytes(pf_c))
        if isinstance(pf_o, (bytes, bytearray)):
            pf_o = decode_scalar(bytes(pf_o))
    except DecodeError:
        return False
    if not 0 <= pf_o < Q:
        return False
    return pairing(pf_c, g2()) == pairing(g1() ** pf_o, pk)


# -- update ----------------------------------------------------------------


@dataclass(frozen=True)
class FwdUpdateToken:
    op: str
    doc_name: bytes
    base_tokens: tuple[ChainToken, ...]
    sig_inserts: tuple[tuple[bytes, G1Element], ...]


def vf_update_token(
    keys: ForwardVKeys,
    doc_id: bytes,
    kws: Sequence[str],
    op: str,
    owner: ForwardOwnerState,
    rng: Rng | None = None,
    backend: ForwardBackend = HASH_CHAIN,
) -> tuple[FwdUpdateToken, ForwardOwnerState]:
    """Token adding (``op="add"``) or deleting one document with keywords ``kws``.

    A delete is an add into the twin structure.  Returns the advanced owner
    state; ``owner`` itself is left untouched.
    """
    check_doc_id(doc_id)
    if not kws:
        raise ValueError("a document needs at least one keyword")
    if len(set(kws)) != len(kws):
        raise ValueError("duplicate keyword in update")
    states = dict(owner.states(op))
    base, inserts = [], []
    for w in kws:
        keyword_bytes(w)
        tok, st = backend.update_token(states.get(w, KeywordState()), doc_id, rng)
        states[w] = st
        base.append(tok)
        inserts.append(_sign_pair(keys, w, doc_id, st.counter, op))
    new_owner = (
        replace(owner, add=states) if op == ADD else replace(owner, deleted=states)
    )
    token = FwdUpdateToken(op, doc_name(doc_id), tuple(base), tuple(inserts))
    return token, new_owner


def vf_apply_update(
    index: EncryptedIndex,
    tsig: SignatureTable,
    token: FwdUpdateToken,
    backend: ForwardBackend = HASH_CHAIN,
) -> tuple[EncryptedIndex, SignatureTable]:
    """Apply all pairs of one document, or none of them on collision."""
    locs = [t.location for t in token.base_tokens]
    positions = [pos for pos, _ in token.sig_inserts]
    if (
        len(set(locs)) != len(locs)
        or len(set(positions)) != len(positions)
        or any(loc in index for loc in locs)
        or any(pos in tsig for pos in positions)
    ):
        raise CollisionError("update collides with stored entries")
    for tok in token.base_tokens:
        backend.apply(index, tok)
    for pos, sigma in token.sig_inserts:
        tsig.insert(pos, sigma)
    return index, tsig


# -- end-to-end helpers ----------------------------------------------------

CloudResponder = Callable[
    [str, CloudStructure, ChainSearchToken, bytes],
    tuple[list[tuple[bytes, int]], G1Element],
]


def honest_responder(
    structure: str, cloud: CloudStructure, token: ChainSearchToken, tag: bytes
) -> tuple[list[tuple[bytes, int]], G1Element]:
    return vf_cloud_search(cloud.index, cloud.tsig, token, tag)


@dataclass(frozen=True)
class SearchVerdict:
    ids: list[bytes]
    accepted: bool
    reason: str | None = None


def verified_search(
    keys: ForwardVKeys,
    w: str,
    owner: ForwardOwnerState,
    cloud: CloudStructure,
    structure: str = ADD,
    respond: CloudResponder = honest_responder,
) -> SearchVerdict:
    """Owner, cloud and auditor steps of one search, run in-process."""
    state = owner.state(w, structure)
    token, tag = vf_search_token(keys, w, state, structure)
    try:
        results, pf_c = respond(structure, cloud, token, tag)
    except IncompleteIndexError:
        return SearchVerdict([], False, "incomplete-index")
    except ProofUnavailableError:
        return SearchVerdict([], False, "proof-unavailable")
    try:
        pf_o = vf_owner_proof(keys, w, results, state.counter, structure)
    except ResultRejected as exc:
        return SearchVerdict([], False, exc.reason)
    if not vf_audit(keys.pk, pf_o, pf_c):
        return SearchVerdict([], False, "pairing-fail")
    return SearchVerdict([doc_id for doc_id, _ in results], True)


def vf_search_with_deletions(
    keys: ForwardVKeys,
    w: str,
    owner: ForwardOwnerState,
    cloud: ForwardCloud,
    respond: CloudResponder = honest_responder,
) -> SearchVerdict:
    """Audit both structures; the answer is added ids minus deleted ids."""
    added = verified_search(keys, w, owner, cloud.add, ADD, respond)
    removed = verified_search(keys, w, owner, cloud.deleted, DEL, respond)
    for part, verdict in ((ADD, added), (DEL, removed)):
        if not verdict.accepted:
            return SearchVerdict([], False, f"{part}:{verdict.reason}")
    gone = set(removed.ids)
    return SearchVerdict([d for d in added.ids if d not in gone], True)


def forward_setup(
    keys: ForwardVKeys, db: PlainDb, rng: Rng | None = None
) -> tuple[ForwardOwnerState, ForwardCloud]:
    index, tsig, states = vf_build(keys, db, rng)
    return ForwardOwnerState(add=states), ForwardCloud(add=CloudStructure(index, tsig))


def apply_to_cloud(cloud: ForwardCloud, token: FwdUpdateToken) -> None:
    s = cloud.structure(token.op)
    vf_apply_update(s.index, s.tsig, token)

