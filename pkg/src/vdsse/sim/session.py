"""Scripted protocol sessions, transcripts and the soundness suite."""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from ..crypto import Rng
from ..errors import ProtocolError
from ..forward import ADD, DEL, vf_keygen
from ..sse import DOC_ID_BYTES, PlainDb, validate_db
from .adversary import TAMPERING, Adversary, Strategy
from .leakage import LeakageRecord, leakage_audit
from .messages import AUDITOR, CLOUD, OWNER, Kind, WireMessage
from .roles import Auditor, Cloud, Owner
from .transport import InProcessTransport, SocketTransport


@dataclass(frozen=True)
class Search:
    keyword: str


@dataclass(frozen=True)
class Add:
    doc_id: bytes
    keywords: tuple[str, ...]


@dataclass(frozen=True)
class Delete:
    doc_id: bytes
    keywords: tuple[str, ...]


Op = Union[Search, Add, Delete]


@dataclass
class SearchRecord:
    session: int
    keyword: str
    ids: list[bytes]
    expected: list[bytes]
    accepted: bool
    reason: str | None
    tampered: bool

    @property
    def forged(self) -> bool:
        return self.accepted and self.ids != self.expected

    @property
    def correct(self) -> bool:
        return self.accepted and self.ids == self.expected


class PlainOracle:
    """Plaintext add/delete lists per keyword, in insertion order."""

    def __init__(self, db: PlainDb):
        self.added = {w: list(ids) for w, ids in db.items()}
        self.deleted: dict[str, list[bytes]] = {}

    def apply(self, op: Add | Delete) -> None:
        for w in op.keywords:
            if isinstance(op, Add):
                if op.doc_id in self.added.get(w, []):
                    raise ValueError(f"pair ({w!r}, {op.doc_id.hex()}) already added")
                self.added.setdefault(w, []).append(op.doc_id)
            else:
                if op.doc_id not in self.live(w):
                    raise ValueError(f"delete of pair never added: ({w!r}, {op.doc_id.hex()})")
                self.deleted.setdefault(w, []).append(op.doc_id)

    def live(self, w: str) -> list[bytes]:
        gone = set(self.deleted.get(w, []))
        return [d for d in self.added.get(w, []) if d not in gone]


@dataclass
class Transcript:
    strategy: str
    messages: list[WireMessage] = field(default_factory=list)
    searches: list[SearchRecord] = field(default_factory=list)
    leakage: list[LeakageRecord] = field(default_factory=list)
    ignored_updates: int = 0
    auditor_bytes: dict[int, int] = field(default_factory=dict)

    def check(self) -> None:
        """Every SearchRequest got exactly one SearchResult and one Verdict."""
        per_session: dict[int, Counter] = {}
        for m in self.messages:
            per_session.setdefault(m.session, Counter())[m.kind] += 1
        for session, kinds in per_session.items():
            if kinds[Kind.SEARCH_REQUEST]:
                if not (
                    kinds[Kind.SEARCH_REQUEST]
                    == kinds[Kind.SEARCH_RESULT]
                    == kinds[Kind.VERDICT]
                    == 1
                ):
                    raise ProtocolError(f"session {session} incomplete: {dict(kinds)}")

    def to_jsonl(self) -> str:
        lines = [{"type": "header", "strategy": self.strategy, "ignored_updates": self.ignored_updates}]
        lines += [{"type": "message", **m.to_dict()} for m in self.messages]
        lines += [{"type": "leakage", **r.to_dict()} for r in self.leakage]
        for s in self.searches:
            lines.append(
                {
                    "type": "search",
                    "session": s.session,
                    "keyword": s.keyword,
                    "ids": [d.hex() for d in s.ids],
                    "expected": [d.hex() for d in s.expected],
                    "accepted": s.accepted,
                    "reason": s.reason,
                    "tampered": s.tampered,
                    "auditor_bytes": self.auditor_bytes.get(s.session, 0),
                }
            )
        return "".join(json.dumps(line, separators=(",", ":")) + "\n" for line in lines)

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        t = cls(strategy="")
        for line in text.splitlines():
            d = json.loads(line)
            kind = d.pop("type")
            if kind == "header":
                t.strategy = d["strategy"]
                t.ignored_updates = d["ignored_updates"]
            elif kind == "message":
                t.messages.append(WireMessage.from_dict(d))
            elif kind == "leakage":
                t.leakage.append(LeakageRecord.from_dict(d))
            elif kind == "search":
                t.auditor_bytes[d["session"]] = d.pop("auditor_bytes")
                t.searches.append(
                    SearchRecord(
                        d["session"],
                        d["keyword"],
                        [bytes.fromhex(x) for x in d["ids"]],
                        [bytes.fromhex(x) for x in d["expected"]],
                        d["accepted"],
                        d["reason"],
                        d["tampered"],
                    )
                )
            else:
                raise ValueError(f"unknown transcript line type {kind!r}")
        return t


def _pump(transport, roles: dict) -> list[WireMessage]:
    seen = []
    while any(transport.pending(name) for name in roles):
        for name, role in roles.items():
            while transport.pending(name):
                msg = transport.recv(name)
                if msg.receiver != name:
                    raise ProtocolError(f"{msg.kind.value} delivered to {name}")
                seen.append(msg)
                for out in role.handle(msg):
                    transport.send(out)
    return seen


def run_session(
    db: PlainDb,
    script: Sequence[Op],
    strategy: Strategy | str = Strategy.HONEST,
    rng: Rng | None = None,
    *,
    adversary_seed: int = 0,
    transport: str = "inproc",
) -> Transcript:
    """Build ``db``, run ``script`` against a cloud playing ``strategy``.

    Session 0 is the build; each script step gets the next session number.
    """
    validate_db(db)
    strategy = Strategy(strategy)
    rng = rng or random.Random()
    keys = vf_keygen(rng)
    owner = Owner(keys, rng)
    cloud = Cloud(Adversary(strategy, adversary_seed))
    auditor = Auditor(keys.pk)
    roles = {OWNER: owner, CLOUD: cloud, AUDITOR: auditor}
    oracle = PlainOracle(db)
    transcript = Transcript(strategy.value)
    expected: dict[int, list[bytes]] = {}

    chan = SocketTransport() if transport == "socket" else InProcessTransport()
    with chan:
        chan.send(owner.build(db, 0))
        transcript.messages += _pump(chan, roles)
        for session, op in enumerate(script, start=1):
            if isinstance(op, Search):
                expected[session] = oracle.live(op.keyword)
                chan.send(owner.search(op.keyword, session))
            else:
                oracle.apply(op)
                kind = ADD if isinstance(op, Add) else DEL
                chan.send(owner.update(op.doc_id, list(op.keywords), kind, session))
            transcript.messages += _pump(chan, roles)

    for session, out in sorted(owner.outcomes.items()):
        transcript.searches.append(
            SearchRecord(
                session,
                out.keyword,
                out.ids,
                expected[session],
                out.accepted,
                out.reason,
                cloud.tampered.get(session, False),
            )
        )
    if len(transcript.searches) != len(expected):
        raise ProtocolError("a search request was never answered")
    transcript.leakage = list(cloud.trace)
    transcript.ignored_updates = cloud.ignored_updates
    transcript.auditor_bytes = dict(auditor.received_bytes)
    transcript.check()
    return transcript


# -- workloads ---------------------------------------------------------------


@dataclass(frozen=True)
class WorkloadConfig:
    n_keywords: int = 5
    n_docs: int = 8
    max_keywords_per_doc: int = 3
    n_adds: int = 3
    n_dels: int = 2


def random_doc_keywords(
    rng: random.Random, keywords: Sequence[str], max_per_doc: int
) -> tuple[str, ...]:
    k = rng.randint(1, min(max_per_doc, len(keywords)))
    return tuple(rng.sample(list(keywords), k))


def random_db(rng: random.Random, n_keywords: int, n_docs: int, max_per_doc: int = 3) -> dict[str, list[bytes]]:
    """Inverted db over ``n_docs`` random documents; keywords ``kw0..``."""
    keywords = [f"kw{j}" for j in range(n_keywords)]
    db: dict[str, list[bytes]] = {}
    for _ in range(n_docs):
        doc_id = rng.randbytes(DOC_ID_BYTES)
        for w in random_doc_keywords(rng, keywords, max_per_doc):
            db.setdefault(w, []).append(doc_id)
    return db


def random_script(
    rng: random.Random, db: PlainDb, cfg: WorkloadConfig = WorkloadConfig()
) -> list[Op]:
    """Search everything, mutate, search everything again."""
    keywords = sorted(set(db) | {f"kw{j}" for j in range(cfg.n_keywords)})
    script: list[Op] = [Search(w) for w in rng.sample(keywords, len(keywords))]
    oracle = PlainOracle(db)
    mutations: list[Op] = []
    for _ in range(cfg.n_adds):
        op = Add(rng.randbytes(DOC_ID_BYTES), random_doc_keywords(rng, keywords, cfg.max_keywords_per_doc))
        oracle.apply(op)
        mutations.append(op)
    live_docs: dict[bytes, list[str]] = {}
    for w in keywords:
        for d in oracle.live(w):
            live_docs.setdefault(d, []).append(w)
    for d in rng.sample(sorted(live_docs), min(cfg.n_dels, len(live_docs))):
        mutations.append(Delete(d, tuple(live_docs[d])))
    # adds first: a delete may target a document added above
    script += mutations
    script += [Search(w) for w in rng.sample(keywords, len(keywords))]
    return script


# -- soundness --------------------------------------------------------------


@dataclass
class StrategyStats:
    strategy: str
    sessions: int = 0
    searches: int = 0
    tampered: int = 0
    accepted: int = 0
    accepted_tampered: int = 0
    accepted_forgeries: int = 0
    ignored_updates: int = 0
    reasons: Counter = field(default_factory=Counter)

    def add(self, t: Transcript) -> None:
        self.sessions += 1
        self.ignored_updates += t.ignored_updates
        for s in t.searches:
            self.searches += 1
            self.tampered += s.tampered
            self.accepted += s.accepted
            self.accepted_tampered += s.accepted and s.tampered
            self.accepted_forgeries += s.forged
            if not s.accepted:
                self.reasons[s.reason] += 1


@dataclass
class SoundnessReport:
    trials: int
    stats: dict[str, StrategyStats]

    @property
    def ok(self) -> bool:
        honest = self.stats.get(Strategy.HONEST.value)
        if honest is not None and honest.accepted != honest.searches:
            return False
        return all(
            s.accepted_forgeries == 0 and s.accepted_tampered == 0 for s in self.stats.values()
        )

    def lines(self) -> list[str]:
        out = []
        for name, s in self.stats.items():
            reasons = ", ".join(f"{r}={n}" for r, n in sorted(s.reasons.items()))
            out.append(
                f"{name:<22} sessions={s.sessions} searches={s.searches} "
                f"tampered={s.tampered} accepted={s.accepted} "
                f"forgeries_accepted={s.accepted_forgeries} [{reasons}]"
            )
        return out


def soundness_suite(
    trials: int,
    rng: random.Random | None = None,
    strategies: Iterable[Strategy] = (Strategy.HONEST, *TAMPERING),
    cfg: WorkloadConfig = WorkloadConfig(),
) -> SoundnessReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = rng or random.Random()
    stats: dict[str, StrategyStats] = {}
    for strategy in strategies:
        st = stats[Strategy(strategy).value] = StrategyStats(Strategy(strategy).value)
        for _ in range(trials):
            session_rng = random.Random(rng.getrandbits(64))
            db = random_db(session_rng, cfg.n_keywords, cfg.n_docs, cfg.max_keywords_per_doc)
            script = random_script(session_rng, db, cfg)
            st.add(
                run_session(
                    db, script, strategy, session_rng, adversary_seed=session_rng.getrandbits(32)
                )
            )
    return SoundnessReport(trials, stats)
