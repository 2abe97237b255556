"""Owner, cloud and auditor as message-driven state machines.

Each role exposes ``handle(msg) -> list[WireMessage]`` and otherwise only
touches its own state. The owner also has entry points that start an
exchange (``build``, ``search``, ``update``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import metrics
from ..crypto import G2Element, Rng, decode_g1, decode_scalar, encode_g1, encode_scalar
from ..errors import DecodeError, IncompleteIndexError, ProofUnavailableError, ProtocolError
from ..forward import (
    STRUCTURES,
    CloudStructure,
    ForwardCloud,
    ForwardOwnerState,
    ForwardVKeys,
    FwdUpdateToken,
    ResultRejected,
    SignatureTable,
    apply_to_cloud,
    position,
    vf_audit,
    vf_build,
    vf_cloud_search,
    vf_owner_proof,
    vf_search_token,
    vf_update_token,
)
from ..sse import DOC_ID_BYTES, ChainSearchToken, ChainToken, EncryptedIndex, PlainDb
from .adversary import Adversary, Answer, honest_answer
from .leakage import LeakageRecord
from .messages import Kind, WireMessage


@dataclass
class SearchOutcome:
    session: int
    keyword: str
    ids: list[bytes]
    accepted: bool
    reason: str | None = None


def _parse_results(raw) -> list[tuple[bytes, int]]:
    out = []
    for item in raw:
        doc_id, i = item
        if not isinstance(doc_id, bytes) or len(doc_id) != DOC_ID_BYTES:
            raise DecodeError("bad id in result")
        if not isinstance(i, int) or isinstance(i, bool):
            raise DecodeError("bad index in result")
        out.append((doc_id, i))
    return out


class Owner:
    name = "owner"

    def __init__(self, keys: ForwardVKeys, rng: Rng | None = None):
        self.keys = keys
        self.rng = rng
        self.state = ForwardOwnerState()
        self._pending: dict[int, tuple[str, dict[str, int]]] = {}
        self._results: dict[int, dict[str, list[tuple[bytes, int]]]] = {}
        self.outcomes: dict[int, SearchOutcome] = {}

    def build(self, db: PlainDb, session: int) -> WireMessage:
        index, tsig, states = vf_build(self.keys, db, self.rng)
        self.state = ForwardOwnerState(add=states)
        empty_index, empty_tsig = EncryptedIndex(), SignatureTable()
        return WireMessage(
            Kind.BUILD_UPLOAD,
            session,
            {
                "index": index.to_bytes(),
                "tsig": tsig.to_bytes(),
                "del_index": empty_index.to_bytes(),
                "del_tsig": empty_tsig.to_bytes(),
            },
        )

    def search(self, w: str, session: int) -> WireMessage:
        requests = []
        counts = {}
        for s in STRUCTURES:
            st = self.state.state(w, s)
            token, tag = vf_search_token(self.keys, w, st, s)
            counts[s] = st.counter
            requests.append(
                {"structure": s, "head": token.head, "count": token.count, "tag": tag}
            )
        self._pending[session] = (w, counts)
        return WireMessage(Kind.SEARCH_REQUEST, session, {"requests": requests})

    def update(self, doc_id: bytes, kws: list[str], op: str, session: int) -> WireMessage:
        token, self.state = vf_update_token(self.keys, doc_id, kws, op, self.state, self.rng)
        return WireMessage(
            Kind.UPDATE_UPLOAD,
            session,
            {
                "op": token.op,
                "doc_name": token.doc_name,
                "chain": [[t.location, t.value] for t in token.base_tokens],
                "sigs": [[pos, encode_g1(sig)] for pos, sig in token.sig_inserts],
            },
        )

    def handle(self, msg: WireMessage) -> list[WireMessage]:
        if msg.kind is Kind.SEARCH_RESULT:
            return self._on_result(msg)
        if msg.kind is Kind.VERDICT:
            self._on_verdict(msg)
            return []
        raise ProtocolError(f"owner cannot accept {msg.kind.value}")

    def _on_result(self, msg: WireMessage) -> list[WireMessage]:
        if msg.session not in self._pending or msg.session in self._results:
            raise ProtocolError(f"unexpected search result for session {msg.session}")
        w, counts = self._pending[msg.session]
        results: dict[str, list[tuple[bytes, int]]] = {}
        out = []
        for s in STRUCTURES:
            payload: dict = {"structure": s}
            error = msg.payload.get("errors", {}).get(s)
            try:
                if error is not None:
                    raise ResultRejected(str(error))
                received = _parse_results(msg.payload["results"][s])
                pf_o = vf_owner_proof(self.keys, w, received, counts[s], s)
                payload["pf_o"] = encode_scalar(pf_o)
                results[s] = received
            except ResultRejected as exc:
                payload["reject"] = exc.reason
            except (DecodeError, KeyError, TypeError, ValueError):
                payload["reject"] = "malformed"
            out.append(WireMessage(Kind.PROOF_OWNER, msg.session, payload))
        self._results[msg.session] = results
        return out

    def _on_verdict(self, msg: WireMessage) -> None:
        if msg.session not in self._results or msg.session in self.outcomes:
            raise ProtocolError(f"unexpected verdict for session {msg.session}")
        w, _ = self._pending.pop(msg.session)
        results = self._results.pop(msg.session)
        accepted = bool(msg.payload["accept"])
        ids: list[bytes] = []
        if accepted:
            gone = {d for d, _ in results["del"]}
            ids = [d for d, _ in results["add"] if d not in gone]
        self.outcomes[msg.session] = SearchOutcome(
            msg.session, w, ids, accepted, msg.payload.get("reason")
        )


class Cloud:
    name = "cloud"

    def __init__(self, adversary: Adversary | None = None):
        self.adversary = adversary or Adversary()
        self.store: ForwardCloud | None = None
        self.trace: list[LeakageRecord] = []
        self.tampered: dict[int, bool] = {}
        self.ignored_updates = 0

    def handle(self, msg: WireMessage) -> list[WireMessage]:
        if msg.kind is Kind.BUILD_UPLOAD:
            return self._on_build(msg)
        if self.store is None:
            raise ProtocolError(f"{msg.kind.value} before BuildUpload")
        if msg.kind is Kind.UPDATE_UPLOAD:
            return self._on_update(msg)
        if msg.kind is Kind.SEARCH_REQUEST:
            return self._on_search(msg)
        raise ProtocolError(f"cloud cannot accept {msg.kind.value}")

    def _on_build(self, msg: WireMessage) -> list[WireMessage]:
        if self.store is not None:
            raise ProtocolError("duplicate BuildUpload")
        p = msg.payload
        self.store = ForwardCloud(
            add=CloudStructure(
                EncryptedIndex.from_bytes(p["index"]), SignatureTable.from_bytes(p["tsig"])
            ),
            deleted=CloudStructure(
                EncryptedIndex.from_bytes(p["del_index"]),
                SignatureTable.from_bytes(p["del_tsig"]),
            ),
        )
        self.trace.append(
            LeakageRecord(
                "build",
                msg.session,
                {
                    "index_size": len(self.store.add.index),
                    "tsig_size": len(self.store.add.tsig),
                    "del_index_size": len(self.store.deleted.index),
                    "del_tsig_size": len(self.store.deleted.tsig),
                },
            )
        )
        return []

    def _on_update(self, msg: WireMessage) -> list[WireMessage]:
        p = msg.payload
        token = FwdUpdateToken(
            p["op"],
            p["doc_name"],
            tuple(ChainToken(loc, value) for loc, value in p["chain"]),
            tuple((pos, decode_g1(sig)) for pos, sig in p["sigs"]),
        )
        self.trace.append(
            LeakageRecord(
                "update",
                msg.session,
                {
                    "op": token.op,
                    "doc_name": token.doc_name,
                    "chain_locations": [t.location for t in token.base_tokens],
                    "chain_values": [t.value for t in token.base_tokens],
                    "positions": [pos for pos, _ in p["sigs"]],
                    "signatures": [sig for _, sig in p["sigs"]],
                },
            )
        )
        if self.adversary.accept_update():
            apply_to_cloud(self.store, token)
        else:
            self.ignored_updates += 1
        return []

    def _on_search(self, msg: WireMessage) -> list[WireMessage]:
        results_out: dict = {}
        errors: dict = {}
        proofs = []
        tampered = False
        for req in msg.payload["requests"]:
            s = req["structure"]
            store = self.store.structure(s)
            token = ChainSearchToken(req["head"], req["count"])
            honest = honest_answer(store, token, req["tag"])
            self._leak_search(msg.session, s, token, req["tag"], honest)
            answer = self.adversary.respond(s, store, token, req["tag"], honest)
            tampered |= answer.tampered
            results_out[s] = (
                [[d, i] for d, i in answer.results] if answer.results is not None else None
            )
            errors[s] = answer.error
            proof: dict = {"structure": s}
            if answer.pf_c is None:
                proof["unavailable"] = True
            else:
                proof["pf_c"] = encode_g1(answer.pf_c)
            proofs.append(WireMessage(Kind.PROOF_CLOUD, msg.session, proof))
        self.tampered[msg.session] = tampered
        result = WireMessage(
            Kind.SEARCH_RESULT, msg.session, {"results": results_out, "errors": errors}
        )
        return [result, *proofs]

    def _leak_search(self, session, s, token, tag, honest: Answer) -> None:
        fields = {"structure": s, "chain_head": token.head, "count": token.count, "tag": tag}
        if honest.results is not None:
            positions = [position(tag, d, i) for d, i in honest.results]
            store = self.store.structure(s)
            fields.update(
                result_ids=[d for d, _ in honest.results],
                result_indices=[i for _, i in honest.results],
                positions=positions,
                signatures=[encode_g1(store.tsig.get(pos)) for pos in positions],
            )
        self.trace.append(LeakageRecord("search", session, fields))


@dataclass
class _AuditSlot:
    cloud: dict[str, dict] = field(default_factory=dict)
    owner: dict[str, dict] = field(default_factory=dict)


class Auditor:
    """Sees one group element and one scalar per structure per search."""

    name = "auditor"

    def __init__(self, pk: G2Element):
        self.pk = pk
        self._slots: dict[int, _AuditSlot] = {}
        self._done: set[int] = set()
        self.received_bytes: dict[int, int] = {}
        self.pairings = 0

    def handle(self, msg: WireMessage) -> list[WireMessage]:
        if msg.kind not in (Kind.PROOF_CLOUD, Kind.PROOF_OWNER):
            raise ProtocolError(f"auditor cannot accept {msg.kind.value}")
        if msg.session in self._done:
            raise ProtocolError(f"proof for closed session {msg.session}")
        slot = self._slots.setdefault(msg.session, _AuditSlot())
        side = slot.cloud if msg.kind is Kind.PROOF_CLOUD else slot.owner
        s = msg.payload["structure"]
        if s in side:
            raise ProtocolError(f"duplicate {msg.kind.value} for {s}")
        side[s] = msg.payload
        self.received_bytes[msg.session] = self.received_bytes.get(msg.session, 0) + sum(
            len(v) for v in msg.payload.values() if isinstance(v, bytes)
        )
        if len(slot.cloud) == len(slot.owner) == len(STRUCTURES):
            return [self._verdict(msg.session, slot)]
        return []

    def _check(self, cloud: dict, owner: dict) -> str | None:
        if "reject" in owner:
            return str(owner["reject"])
        if cloud.get("unavailable"):
            return "proof-unavailable"
        try:
            pf_c = decode_g1(cloud["pf_c"])
            pf_o = decode_scalar(owner["pf_o"])
        except (DecodeError, KeyError, TypeError):
            return "malformed"
        with metrics.counting() as ops:
            ok = vf_audit(self.pk, pf_o, pf_c)
        self.pairings += ops[metrics.PAIRING]
        return None if ok else "pairing-fail"

    def _verdict(self, session: int, slot: _AuditSlot) -> WireMessage:
        del self._slots[session]
        self._done.add(session)
        payload = {"accept": True, "reason": None, "structure": None}
        for s in STRUCTURES:
            reason = self._check(slot.cloud[s], slot.owner[s])
            if reason is not None:
                payload = {"accept": False, "reason": reason, "structure": s}
                break
        return WireMessage(Kind.VERDICT, session, payload)
