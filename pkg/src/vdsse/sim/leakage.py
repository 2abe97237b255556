"""Cloud-view leakage records and their audit.

Every value the cloud observes is logged under a field name, and every field
name must map to a term of the scheme's build / search / update leakage.
The audit also replays the one link a forward-privacy break would need.
The cloud knows ``tag_w`` from past searches and the ids those searches
revealed, so it can compute every ``prf(tag_w, id || i)``.  None of these
may equal a position uploaded by a later add.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable

from ..crypto import G1_BYTES, LAMBDA_BYTES
from ..forward import STRUCTURES, position
from ..sse import CHAIN_VALUE_BYTES, DOC_ID_BYTES


def _nat(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _blob(n: int) -> Callable[[Any], bool]:
    return lambda v: isinstance(v, bytes) and len(v) == n


def _blobs(n: int) -> Callable[[Any], bool]:
    return lambda v: isinstance(v, list) and all(isinstance(x, bytes) and len(x) == n for x in v)


def _nats(v: Any) -> bool:
    return isinstance(v, list) and all(_nat(x) and x >= 1 for x in v)


def _structure(v: Any) -> bool:
    return v in STRUCTURES


# field -> (leakage term, shape check)
SCHEMA: dict[str, dict[str, tuple[str, Callable[[Any], bool]]]] = {
    "build": {
        "index_size": ("L_bld^Sigma_f(DB)", _nat),
        "tsig_size": ("|T_sig|", _nat),
        "del_index_size": ("L_bld^Sigma_f(DB) [deletion twin]", _nat),
        "del_tsig_size": ("|T_sig| [deletion twin]", _nat),
    },
    "search": {
        "structure": ("structure selector (twin)", _structure),
        "chain_head": ("L_srch^Sigma_f(w)", _blob(LAMBDA_BYTES)),
        "count": ("L_srch^Sigma_f(w)", _nat),
        "tag": ("L_srch^Sigma_f(w) [search pattern]", _blob(LAMBDA_BYTES)),
        "result_ids": ("id^w_i", _blobs(DOC_ID_BYTES)),
        "result_indices": ("i of id^w_i", _nats),
        "positions": ("pos^w_i", _blobs(32)),
        "signatures": ("sigma^w_i", _blobs(G1_BYTES)),
    },
    "update": {
        "op": ("op (structure selector)", _structure),
        "doc_name": ("id, as H'(id)", _blob(32)),
        "chain_locations": ("L_updt^Sigma_f(w_i, id)", _blobs(32)),
        "chain_values": ("L_updt^Sigma_f(w_i, id)", _blobs(CHAIN_VALUE_BYTES)),
        "positions": ("pos^{w_i}", _blobs(32)),
        "signatures": ("sigma^{w_i}", _blobs(G1_BYTES)),
    },
}


@dataclass
class LeakageRecord:
    op: str
    session: int
    fields: dict[str, Any]

    def to_dict(self) -> dict:
        from .messages import to_jsonable

        return {"op": self.op, "session": self.session, "fields": to_jsonable(self.fields)}

    @classmethod
    def from_dict(cls, d: dict) -> "LeakageRecord":
        from .messages import from_jsonable

        return cls(d["op"], int(d["session"]), from_jsonable(d["fields"]))


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    field: str | None = None
    detail: str = ""
    candidates_checked: int = 0

    def __bool__(self) -> bool:
        return self.passed


def _schema_violation(rec: LeakageRecord) -> AuditResult | None:
    allowed = SCHEMA.get(rec.op)
    if allowed is None:
        return AuditResult(False, "op", f"unknown operation {rec.op!r}")
    for name, value in rec.fields.items():
        if name not in allowed:
            return AuditResult(False, name, f"{rec.op} field has no leakage term")
        if not allowed[name][1](value):
            return AuditResult(False, name, f"{rec.op} field has unexpected shape")
    return None


def leakage_audit(records: Iterable[LeakageRecord]) -> AuditResult:
    """Schema check plus the forward-privacy recomputation.

    For the recomputation the index bound for a tag is the largest count
    searched under it plus the number of pairs uploaded since, which covers
    every index a new pair for that keyword could carry.
    """
    known_ids: set[bytes] = set()
    tag_bound: dict[bytes, int] = {}
    candidates: set[bytes] = set()
    done: set[tuple[bytes, bytes, int]] = set()
    checked = 0
    for rec in records:
        bad = _schema_violation(rec)
        if bad is not None:
            return bad
        f = rec.fields
        if rec.op == "search":
            tag = f.get("tag")
            if tag is not None:
                tag_bound[tag] = max(tag_bound.get(tag, 0), f.get("count", 0))
            known_ids.update(f.get("result_ids", []))
        elif rec.op == "update":
            new_pairs = len(f.get("positions", []))
            for tag in tag_bound:
                tag_bound[tag] += new_pairs
            if f.get("op") != "add":
                # a delete names an already-added pair; linking it is expected
                continue
            for tag, bound in tag_bound.items():
                for doc_id in known_ids:
                    for i in range(1, bound + 1):
                        if (tag, doc_id, i) not in done:
                            done.add((tag, doc_id, i))
                            candidates.add(position(tag, doc_id, i))
            checked = len(candidates)
            for pos in f.get("positions", []):
                if pos in candidates:
                    return AuditResult(
                        False,
                        "positions",
                        f"session {rec.session}: update position recomputable from transcript",
                        checked,
                    )
    return AuditResult(True, candidates_checked=checked)
