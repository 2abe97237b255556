"""Three-party simulator: messages, roles, adversaries, leakage audit."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdsse.crypto import G1_BYTES, SCALAR_BYTES
from vdsse.errors import ProtocolError
from vdsse.forward import STRUCTURES, vf_keygen
from vdsse.sim import (
    TAMPERING,
    Add,
    Adversary,
    Auditor,
    Cloud,
    Delete,
    InProcessTransport,
    Kind,
    LeakageRecord,
    Owner,
    Search,
    SocketTransport,
    Strategy,
    Transcript,
    WireMessage,
    WorkloadConfig,
    leakage_audit,
    random_db,
    random_script,
    run_session,
    soundness_suite,
)
from vdsse.sim.messages import ROUTES

PER_SEARCH_AUDITOR_BYTES = len(STRUCTURES) * (G1_BYTES + SCALAR_BYTES)


def small_session(strategy=Strategy.HONEST, seed=1, **kw):
    rng = random.Random(seed)
    db = random_db(rng, 5, 8)
    script = random_script(rng, db)
    return run_session(db, script, strategy, rng, adversary_seed=seed, **kw)


# -- messages and transport ---------------------------------------------------


def test_wire_round_trip():
    msg = WireMessage(Kind.SEARCH_RESULT, 7, {"results": {"add": [[b"\x01" * 16, 1]]}, "n": None})
    again = WireMessage.decode(msg.encode())
    assert again == WireMessage(Kind.SEARCH_RESULT, 7, {"results": {"add": [[b"\x01" * 16, 1]]}, "n": None})
    assert again.sender == "cloud" and again.receiver == "owner"


def test_every_kind_has_a_route():
    assert set(ROUTES) == set(Kind)


@pytest.mark.parametrize("transport", [InProcessTransport, SocketTransport])
def test_transport_delivers_in_order(transport):
    with transport() as chan:
        for j in range(5):
            chan.send(WireMessage(Kind.VERDICT, j, {"accept": True}))
        got = []
        while chan.pending("owner"):
            got.append(chan.recv("owner").session)
        assert got == list(range(5))
        assert not chan.pending("cloud")


# -- role state machines -------------------------------------------------------


def test_auditor_refuses_out_of_order():
    keys = vf_keygen(random.Random(0))
    auditor = Auditor(keys.pk)
    with pytest.raises(ProtocolError):
        auditor.handle(WireMessage(Kind.SEARCH_REQUEST, 1, {}))
    proof = WireMessage(Kind.PROOF_CLOUD, 1, {"structure": "add", "pf_c": bytes(G1_BYTES)})
    auditor.handle(proof)
    with pytest.raises(ProtocolError):
        auditor.handle(proof)


def test_cloud_refuses_search_before_build():
    with pytest.raises(ProtocolError):
        Cloud().handle(WireMessage(Kind.SEARCH_REQUEST, 1, {"requests": []}))


def test_owner_refuses_unsolicited_result():
    rng = random.Random(0)
    owner = Owner(vf_keygen(rng), rng)
    with pytest.raises(ProtocolError):
        owner.handle(WireMessage(Kind.SEARCH_RESULT, 3, {"results": {}}))
    with pytest.raises(ProtocolError):
        owner.handle(WireMessage(Kind.VERDICT, 3, {"accept": True}))


def test_ill_formed_script_rejected():
    rng = random.Random(0)
    with pytest.raises(ValueError):
        run_session({}, [Delete(bytes(16), ("w",))], rng=rng)
    d = bytes(16)
    with pytest.raises(ValueError):
        run_session({"w": [d]}, [Add(d, ("w",))], rng=rng)


# -- honest runs ---------------------------------------------------------------


def test_honest_session_matches_oracle():
    t = small_session()
    assert t.searches
    for s in t.searches:
        assert s.accepted and s.ids == s.expected and not s.tampered


def test_socket_transport_same_transcript():
    a = small_session(seed=4)
    b = small_session(seed=4, transport="socket")
    assert a.to_jsonl() == b.to_jsonl()


def test_transcript_jsonl_round_trip():
    t = small_session(Strategy.DROP_ONE, seed=3)
    text = t.to_jsonl()
    again = Transcript.from_jsonl(text)
    assert again.to_jsonl() == text
    assert [s.accepted for s in again.searches] == [s.accepted for s in t.searches]
    with pytest.raises(ValueError):
        Transcript.from_jsonl('{"type":"bogus"}')


def test_every_request_answered_once():
    t = small_session(seed=9)
    t.check()
    requests = [m for m in t.messages if m.kind is Kind.SEARCH_REQUEST]
    verdicts = [m for m in t.messages if m.kind is Kind.VERDICT]
    assert [m.session for m in requests] == [m.session for m in verdicts]
    t.messages.append(verdicts[0])
    with pytest.raises(ProtocolError):
        t.check()


def test_completeness_over_1000_operations():
    rng = random.Random(1000)
    ops = 0
    cfg = WorkloadConfig(n_keywords=8, n_docs=12, n_adds=6, n_dels=4)
    while ops < 1000:
        db = random_db(rng, cfg.n_keywords, cfg.n_docs)
        script = random_script(rng, db, cfg)
        t = run_session(db, script, Strategy.HONEST, rng)
        assert all(s.correct for s in t.searches)
        ops += len(script)
    assert ops >= 1000


def test_auditor_blindness():
    # one group element and one scalar per structure, whatever the result size
    rng = random.Random(2)
    big = [rng.randbytes(16) for _ in range(40)]
    db = {"big": big, "one": big[:1]}
    t = run_session(db, [Search("big"), Search("one"), Search("none")], rng=rng)
    assert set(t.auditor_bytes.values()) == {PER_SEARCH_AUDITOR_BYTES}
    assert len(t.auditor_bytes) == 3
    auditor_kinds = {m.kind for m in t.messages if m.receiver == "auditor"}
    assert auditor_kinds == {Kind.PROOF_CLOUD, Kind.PROOF_OWNER}


# -- adversaries ----------------------------------------------------------------


def test_drop_one_rejects():
    rng = random.Random(5)
    db = {"w": [rng.randbytes(16) for _ in range(4)]}
    t = run_session(db, [Search("w")], Strategy.DROP_ONE, rng)
    (s,) = t.searches
    # the shortened list no longer covers indices 1..c, so the owner refuses it
    assert s.tampered and not s.accepted and s.reason == "count-mismatch"


def test_stale_cloud_count_mismatch():
    rng = random.Random(6)
    d = rng.randbytes(16)
    db = {"w": [rng.randbytes(16)]}
    t = run_session(db, [Search("w"), Add(d, ("w",)), Search("w")], Strategy.STALE_IGNORE_UPDATE, rng)
    first, second = t.searches
    assert first.accepted
    assert not second.accepted and second.reason == "count-mismatch"
    assert t.ignored_updates == 1


def test_flip_and_forge_reject():
    for strategy in (Strategy.FLIP_ID_BIT, Strategy.FORGE_PROOF):
        rng = random.Random(7)
        db = {"w": [rng.randbytes(16) for _ in range(3)]}
        (s,) = run_session(db, [Search("w")], strategy, rng).searches
        assert not s.accepted and s.reason == "pairing-fail"


def test_replay_other_keyword_rejects():
    rng = random.Random(8)
    db = {"a": [rng.randbytes(16) for _ in range(2)], "b": [rng.randbytes(16) for _ in range(2)]}
    t = run_session(db, [Search("a"), Search("b")], Strategy.REPLAY_OTHER_KEYWORD, rng)
    first, second = t.searches
    assert first.accepted and not first.tampered
    assert second.tampered and not second.accepted


@pytest.mark.parametrize("strategy", list(Strategy))
def test_strategies_deterministic_given_seed(strategy):
    assert small_session(strategy, seed=11).to_jsonl() == small_session(strategy, seed=11).to_jsonl()


@pytest.mark.parametrize("strategy", TAMPERING)
def test_no_tampered_result_accepted(strategy):
    for seed in range(5):
        t = small_session(strategy, seed=seed)
        for s in t.searches:
            assert not s.forged
            assert not (s.tampered and s.accepted)


def test_soundness_suite_report():
    report = soundness_suite(4, random.Random(12))
    assert report.ok
    assert set(report.stats) == {s.value for s in Strategy}
    honest = report.stats["HONEST"]
    assert honest.accepted == honest.searches > 0
    for name in (s.value for s in TAMPERING):
        assert report.stats[name].accepted_forgeries == 0
    assert report.stats["FLIP_ID_BIT"].reasons["pairing-fail"] > 0
    assert report.stats["STALE_IGNORE_UPDATE"].reasons["count-mismatch"] > 0
    assert len(report.lines()) == len(Strategy)
    with pytest.raises(ValueError):
        soundness_suite(0)


def test_adversary_history_only_from_honest_answers():
    adv = Adversary(Strategy.REPLAY_OTHER_KEYWORD)
    assert adv.accept_update()
    assert not Adversary(Strategy.STALE_IGNORE_UPDATE).accept_update()


# -- leakage audit ----------------------------------------------------------


def test_honest_transcripts_pass_audit():
    for seed in range(5):
        result = leakage_audit(small_session(seed=seed).leakage)
        assert result.passed, result


def test_doctored_keyword_field_fails():
    t = small_session(seed=2)
    records = list(t.leakage)
    k = next(j for j, r in enumerate(records) if r.op == "update")
    doctored = LeakageRecord("update", records[k].session, {**records[k].fields, "keyword": "kw0"})
    records[k] = doctored
    result = leakage_audit(records)
    assert not result.passed and result.field == "keyword"


def test_wrong_shape_and_unknown_op_fail():
    assert leakage_audit([LeakageRecord("peek", 1, {})]).field == "op"
    bad = LeakageRecord("search", 1, {"positions": [b"short"]})
    assert leakage_audit([bad]).field == "positions"


def test_planted_linkable_position_fails():
    # an update position equal to prf(tag_w, id || i) of a revealed id must be caught
    from vdsse.forward import position

    tag, doc_id = b"\x07" * 32, b"\x01" * 16
    search = LeakageRecord(
        "search", 1, {"structure": "add", "tag": tag, "count": 1, "result_ids": [doc_id]}
    )
    leak = LeakageRecord("update", 2, {"op": "add", "positions": [position(tag, doc_id, 2)]})
    result = leakage_audit([search, leak])
    assert not result.passed and result.field == "positions"
    fresh = LeakageRecord("update", 2, {"op": "add", "positions": [bytes(32)]})
    assert leakage_audit([search, fresh]).passed


def test_forward_privacy_search_then_add():
    rng = random.Random(13)
    db = {"w": [rng.randbytes(16) for _ in range(3)]}
    script = [Search("w")] + [Add(rng.randbytes(16), ("w",)) for _ in range(3)] + [Search("w")]
    t = run_session(db, script, rng=rng)
    result = leakage_audit(t.leakage)
    assert result.passed and result.candidates_checked > 0
    assert t.searches[-1].accepted and len(t.searches[-1].ids) == 6


@settings(max_examples=15)
@given(st.integers(0, 2**32), st.sampled_from(list(Strategy)))
def test_session_property(seed, strategy):
    t = small_session(strategy, seed=seed)
    assert leakage_audit(t.leakage).passed
    for s in t.searches:
        assert not s.forged
        if strategy is Strategy.HONEST:
            assert s.correct


def test_empty_store_search_accepts():
    rng = random.Random(14)
    t = run_session({}, [Search("nothing")], rng=rng)
    assert t.searches[0].accepted and t.searches[0].ids == []
