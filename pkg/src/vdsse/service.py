"""Store-level operations behind the CLI verbs.

Each function loads what its role needs from a :class:`~vdsse.store.Store`,
runs the scheme, and writes back.  Callers hold the store lock.
"""

from __future__ import annotations

import random
import re
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .crypto import Rng, default_rng, doc_name
from .errors import DecodeError, IncompleteIndexError, OwnerStateError, VsseError
from .forward import (
    ADD,
    DEL,
    ForwardCloud,
    ForwardOwnerState,
    ResultRejected,
    SearchVerdict,
    apply_to_cloud,
    honest_responder,
    vf_build,
    vf_search_with_deletions,
    vf_update_token,
    verified_search,
)
from .sim.adversary import Adversary, Strategy, as_responder
from .sse import DOC_ID_BYTES, PlainDb, keyword_bytes, validate_db
from .static import vs_build, vs_cloud_search, vs_search_token, vs_verify
from .store import CLOUD_DIR, OwnerState, Store, StoreKeys

STATIC, FORWARD = "static", "forward"
SCHEMES = (STATIC, FORWARD)

_HEX_ID = re.compile(r"[0-9a-fA-F]{%d}" % (2 * DOC_ID_BYTES))


class CorpusError(VsseError, ValueError):
    """The corpus file does not parse, or repeats a (keyword, id) pair."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_doc_id(text: str) -> bytes:
    if not _HEX_ID.fullmatch(text):
        raise ValueError(f"document id must be {2 * DOC_ID_BYTES} hex characters: {text!r}")
    return bytes.fromhex(text)


def parse_corpus(text: str) -> dict[str, list[bytes]]:
    """Parse ``keyword<TAB>id,id,...`` lines into an inverted db.

    Blank lines are skipped. A keyword may span several lines; its ids are
    concatenated in file order.
    """
    db: dict[str, list[bytes]] = {}
    seen: set[tuple[str, bytes]] = set()
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusError(n, "expected 'keyword<TAB>comma-separated ids'")
        w, ids_field = parts[0], parts[1].strip()
        try:
            keyword_bytes(w)
        except ValueError as exc:
            raise CorpusError(n, str(exc)) from None
        if not ids_field:
            raise CorpusError(n, f"keyword {w!r} has no ids")
        for raw in ids_field.split(","):
            try:
                doc_id = parse_doc_id(raw.strip())
            except ValueError as exc:
                raise CorpusError(n, str(exc)) from None
            if (w, doc_id) in seen:
                raise CorpusError(n, f"duplicate pair ({w!r}, {doc_id.hex()})")
            seen.add((w, doc_id))
            db.setdefault(w, []).append(doc_id)
    return db


def format_corpus(db: PlainDb) -> str:
    return "".join(f"{w}\t{','.join(d.hex() for d in ids)}\n" for w, ids in db.items() if ids)


def keygen(root, rng: Rng | None = None, force: bool = False) -> Store:
    from .forward import vf_keygen
    from .static import vs_keygen

    store = Store(root)
    store.root.mkdir(parents=True, exist_ok=True)
    with store.locked():
        store.initialise(StoreKeys(vf_keygen(rng), vs_keygen(rng)), force=force)
    return store


def build(store: Store, db: PlainDb, rng: Rng | None = None, force: bool = False) -> OwnerState:
    """Encrypt ``db`` into both schemes, replacing an empty corpus."""
    rng = rng or default_rng()
    validate_db(db)
    keys = store.load_keys()
    state = store.load_owner_state()
    if state.built and not force:
        raise OwnerStateError("store already holds a corpus (use --force to rebuild)")
    static_index, counts = vs_build(keys.static, db, rng)
    index, tsig, states = vf_build(keys.forward, db, rng)
    cloud = ForwardCloud()
    cloud.add.index, cloud.add.tsig = index, tsig
    new_state = OwnerState(forward=ForwardOwnerState(add=states), static_counts=counts, built=True)
    store.save_static_index(static_index)
    store.save_cloud(cloud)
    store.save_owner_state(new_state)
    return new_state


@dataclass
class SearchReport:
    keyword: str
    scheme: str
    ids: list[bytes]
    accepted: bool
    reason: str | None = None

    @property
    def verdict(self) -> str:
        return "ACCEPT" if self.accepted else f"REJECT {self.reason}"

    def lines(self) -> list[str]:
        out = [f"{d.hex()}  {doc_name(d).hex()}" for d in self.ids]
        return out + [self.verdict]


def _split_reason(reason: str | None) -> str | None:
    # "add:pairing-fail" -> "pairing-fail (add)"
    if reason and ":" in reason:
        part, why = reason.split(":", 1)
        return f"{why} ({part})"
    return reason


def static_search(
    keys: StoreKeys, state: OwnerState, index, w: str, adversary: Adversary | None = None
) -> SearchReport:
    token = vs_search_token(keys.static, w, state.static_counts)
    if token.count == 0:
        return SearchReport(w, STATIC, [], True)
    try:
        slots = vs_cloud_search(index, token)
    except (IncompleteIndexError, DecodeError):
        slots = None
    if slots is not None and adversary is not None:
        slots = adversary.respond_static(token.k1, slots)
    v = vs_verify(keys.static, w, slots)
    return SearchReport(w, STATIC, v.ids, v.accepted, v.reason)


def forward_search(
    keys: StoreKeys, state: OwnerState, cloud: ForwardCloud, w: str, adversary: Adversary | None = None
) -> SearchReport:
    respond = as_responder(adversary) if adversary is not None else honest_responder
    v = vf_search_with_deletions(keys.forward, w, state.forward, cloud, respond)
    return SearchReport(w, FORWARD, v.ids, v.accepted, _split_reason(v.reason))


def search(
    store: Store, w: str, scheme: str = FORWARD, strategy: Strategy | str | None = None, seed: int | None = None
) -> SearchReport:
    keyword_bytes(w)
    keys = store.load_keys()
    state = store.load_owner_state()
    adversary = None
    if strategy is not None:
        adversary = Adversary(Strategy(strategy), seed if seed is not None else random.randrange(2**32))
    if scheme == STATIC:
        return static_search(keys, state, store.load_static_index(), w, adversary)
    if scheme == FORWARD:
        return forward_search(keys, state, store.load_cloud(), w, adversary)
    raise ValueError(f"unknown scheme {scheme!r}")


def _verified_ids(keys: StoreKeys, state: OwnerState, cloud: ForwardCloud, w: str, structure: str) -> list[bytes]:
    v: SearchVerdict = verified_search(keys.forward, w, state.forward, cloud.structure(structure), structure)
    if not v.accepted:
        raise ResultRejected(f"{v.reason} ({structure})", f"precondition search for {w!r}")
    return v.ids


def update(
    store: Store,
    op: str,
    doc_id: bytes,
    keywords: Sequence[str],
    rng: Rng | None = None,
    strategy: Strategy | str | None = None,
) -> OwnerState:
    """Add or delete one document under ``keywords``.

    The owner keeps no plaintext postings, so preconditions are checked with
    verified searches: an add must be new for each keyword (re-adding a
    deleted pair is refused too), a delete must hit a live pair.  With
    ``STALE_IGNORE_UPDATE`` the cloud drops the upload while the owner state
    still advances, which later searches detect.
    """
    if op not in (ADD, DEL):
        raise ValueError(f"unknown update op {op!r}")
    rng = rng or default_rng()
    keys = store.load_keys()
    state = store.load_owner_state()
    if not state.built:
        raise OwnerStateError("store has no corpus yet (run build first)")
    cloud = store.load_cloud()
    for w in keywords:
        added = _verified_ids(keys, state, cloud, w, ADD)
        if op == ADD and doc_id in added:
            raise OwnerStateError(f"pair ({w!r}, {doc_id.hex()}) was already added")
        if op == DEL:
            if doc_id not in added:
                raise OwnerStateError(f"delete of pair never added: ({w!r}, {doc_id.hex()})")
            if doc_id in _verified_ids(keys, state, cloud, w, DEL):
                raise OwnerStateError(f"pair ({w!r}, {doc_id.hex()}) is already deleted")
    token, fwd = vf_update_token(keys.forward, doc_id, list(keywords), op, state.forward, rng)
    if strategy is None or Adversary(Strategy(strategy)).accept_update():
        apply_to_cloud(cloud, token)
        store.save_cloud(cloud)
    new_state = OwnerState(fwd, state.static_counts, True, state.updates + 1)
    store.save_owner_state(new_state)
    return new_state


# -- soundness against on-disk state ------------------------------------------


@dataclass
class StoreSoundness:
    trials: int
    rows: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        honest = self.rows.get(Strategy.HONEST.value)
        if honest is not None and honest["accepted"] != honest["searches"]:
            return False
        return all(r["forgeries"] == 0 for r in self.rows.values())

    def lines(self) -> list[str]:
        return [
            f"{name:<22} " + " ".join(f"{k}={v}" for k, v in row.items())
            for name, row in self.rows.items()
        ]


def _copy_cloud(store: Store, dest: Path) -> Store:
    shutil.copytree(store.path(CLOUD_DIR), dest / CLOUD_DIR)
    return Store(dest)


def store_soundness(
    store: Store,
    trials: int,
    strategies: Iterable[Strategy] = tuple(Strategy),
    rng: random.Random | None = None,
) -> StoreSoundness:
    """Replay the soundness game against a copy of the store's cloud files.

    The adversary only ever sees a copy of ``cloud/``; the owner and auditor
    keep using the real owner and auditor files.  Each trial optionally adds
    one fresh document (the cloud may ignore it), then searches one keyword
    under both schemes and compares with the honest answer.  The store
    itself is never modified.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = rng or random.Random()
    keys = store.load_keys()
    base_state = store.load_owner_state()
    keywords = sorted(set(base_state.forward.add) | set(base_state.static_counts)) or ["(none)"]
    report = StoreSoundness(trials)
    with tempfile.TemporaryDirectory() as tmp:
        cloud_only = _copy_cloud(store, Path(tmp))
        static_index = cloud_only.load_static_index()
        for strategy in strategies:
            strategy = Strategy(strategy)
            row = dict(searches=0, accepted=0, rejected=0, forgeries=0)
            adversary = Adversary(strategy, rng.getrandbits(32))
            for _ in range(trials):
                cloud = cloud_only.load_cloud()
                honest_cloud = cloud_only.load_cloud()
                state = base_state
                w = rng.choice(keywords)
                if rng.random() < 0.5 or strategy is Strategy.STALE_IGNORE_UPDATE:
                    doc_id = rng.randbytes(DOC_ID_BYTES)
                    token, fwd = vf_update_token(keys.forward, doc_id, [w], ADD, state.forward, rng)
                    state = OwnerState(fwd, state.static_counts, True, state.updates + 1)
                    apply_to_cloud(honest_cloud, token)
                    if adversary.accept_update():
                        apply_to_cloud(cloud, token)
                expected_fwd = forward_search(keys, state, honest_cloud, w)
                expected_static = static_search(keys, state, static_index, w)
                got_fwd = forward_search(keys, state, cloud, w, adversary)
                got_static = static_search(keys, state, static_index, w, adversary)
                for got, expected in ((got_fwd, expected_fwd), (got_static, expected_static)):
                    row["searches"] += 1
                    row["accepted"] += got.accepted
                    row["rejected"] += not got.accepted
                    row["forgeries"] += got.accepted and got.ids != expected.ids
            report.rows[strategy.value] = row
    return report
