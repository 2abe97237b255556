"""On-disk store and the service layer behind the CLI."""

import random

import pytest
from hypothesis import given, settings
from strategies import plain_dbs, random_plain_db

from vdsse.crypto import encode_scalar
from vdsse.errors import DecodeError, OwnerStateError, StoreError
from vdsse.forward import ADD, DEL, ResultRejected
from vdsse.service import (
    FORWARD,
    STATIC,
    CorpusError,
    build,
    format_corpus,
    keygen,
    parse_corpus,
    search,
    store_soundness,
    update,
)
from vdsse.sim import Strategy
from vdsse.store import (
    AUDITOR_DIR,
    CLOUD_DIR,
    INDEX_FILES,
    KEYS_FILE,
    OWNER_DIR,
    PK_FILE,
    STATE_FILE,
    STATIC_INDEX_FILE,
    TSIG_FILES,
    OwnerState,
    Store,
    StoreKeys,
    file_summary,
)


@pytest.fixture
def store(tmp_path):
    return keygen(tmp_path / "s", random.Random(1))


def built(store, db, seed=2):
    build(store, db, random.Random(seed))
    return store


def ids(n, seed=0):
    rng = random.Random(seed)
    return [rng.randbytes(16) for _ in range(n)]


# -- corpus format -------------------------------------------------------------


def test_corpus_round_trip(rng):
    db = random_plain_db(rng, 10, 60)
    assert parse_corpus(format_corpus(db)) == {w: v for w, v in db.items() if v}


def test_corpus_blank_lines_and_continuations():
    a, b = "aa" * 16, "bb" * 16
    db = parse_corpus(f"\nw\t{a}\n\nw\t{b}\nv\t {a} , {b}\n")
    assert db == {"w": [bytes.fromhex(a), bytes.fromhex(b)], "v": [bytes.fromhex(a), bytes.fromhex(b)]}


@pytest.mark.parametrize(
    "text,line",
    [
        ("w\t" + "aa" * 16 + "\nbroken line\n", 2),
        ("w\t\n", 1),
        ("\n\nw\tzz\n", 3),
        ("w\t" + "aa" * 15 + "\n", 1),
        ("\t" + "aa" * 16 + "\n", 1),
        ("w\t" + "aa" * 16 + "\nx\t" + "bb" * 16 + "\nw\t" + "AA" * 16 + "\n", 3),
    ],
)
def test_corpus_errors_name_the_line(text, line):
    with pytest.raises(CorpusError) as exc:
        parse_corpus(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


# -- layout ----------------------------------------------------------------------


def test_keygen_layout(store):
    for d in (OWNER_DIR, CLOUD_DIR, AUDITOR_DIR):
        assert store.path(d).is_dir()
    assert [f.name for f in store.path(AUDITOR_DIR).iterdir()] == ["pk"]
    assert store.load_pk() == store.load_keys().forward.pk


def test_keygen_refuses_non_empty(store):
    with pytest.raises(StoreError):
        keygen(store.root, random.Random(3))
    before = store.load_keys()
    keygen(store.root, random.Random(3), force=True)
    assert store.load_keys().forward.bls.sk != before.forward.bls.sk


def test_role_separation_of_secrets(store):
    built(store, {"w": ids(3)})
    keys = store.load_keys()
    secrets = [
        encode_scalar(keys.forward.bls.sk),
        keys.forward.seed_master,
        keys.forward.tag_master,
        keys.static.base_key,
        keys.static.tag_master,
    ]
    for rel in [STATIC_INDEX_FILE, *INDEX_FILES.values(), *TSIG_FILES.values(), PK_FILE]:
        blob = store.path(rel).read_bytes()
        assert not any(s in blob for s in secrets), rel
    # no plaintext ids leave the owner subtree
    for rel in [STATIC_INDEX_FILE, *INDEX_FILES.values(), *TSIG_FILES.values()]:
        blob = store.path(rel).read_bytes()
        assert not any(d in blob for d in ids(3))


def test_files_carry_magic_and_version(store):
    magics = {
        KEYS_FILE: b"VKEY",
        STATE_FILE: b"VOST",
        PK_FILE: b"VPUB",
        STATIC_INDEX_FILE: b"VIDX",
        INDEX_FILES[ADD]: b"VIDX",
        TSIG_FILES[ADD]: b"VSIG",
    }
    for rel, magic in magics.items():
        head = store.path(rel).read_bytes()[:5]
        assert head == magic + b"\x01", rel


def test_empty_build_gives_empty_cloud(store):
    built(store, {})
    cloud = store.load_cloud()
    assert len(cloud.add.index) == len(cloud.add.tsig) == 0
    assert len(store.load_static_index()) == 0
    assert search(store, "anything").accepted


def test_three_line_fixture_tsig_equals_pairs(store):
    text = "alpha\t" + ",".join(d.hex() for d in ids(3)) + "\n"
    text += "beta\t" + ids(1, 9)[0].hex() + "\n"
    text += "gamma\t" + ",".join(d.hex() for d in ids(2, 5)) + "\n"
    db = parse_corpus(text)
    built(store, db)
    assert len(store.load_cloud().add.tsig) == 6
    # static overhead is exactly one tag per keyword
    assert len(store.load_static_index()) == 6 + 3


def test_build_twice_refused(store):
    built(store, {"w": ids(1)})
    with pytest.raises(OwnerStateError):
        build(store, {"w": ids(1)}, random.Random(0))
    build(store, {"v": ids(2)}, random.Random(0), force=True)
    assert search(store, "w").ids == []
    assert search(store, "v").ids == ids(2)


def test_rebuilt_store_matches_oracle(store, rng):
    db = random_plain_db(rng, 20, 200)
    built(store, db)
    for w, expected in db.items():
        for scheme in (STATIC, FORWARD):
            r = search(store, w, scheme)
            assert r.accepted and r.ids == expected


def test_unknown_keyword_accepts_empty(store):
    built(store, {"w": ids(2)})
    for scheme in (STATIC, FORWARD):
        r = search(store, "never-seen", scheme)
        assert r.accepted and r.ids == [] and r.verdict == "ACCEPT"


def test_adversarial_search_rejects(store):
    built(store, {"w": ids(3), "v": ids(3, 1)})
    r = search(store, "w", FORWARD, Strategy.FLIP_ID_BIT, seed=0)
    assert not r.accepted and r.verdict == "REJECT pairing-fail (add)"
    r = search(store, "w", STATIC, Strategy.FLIP_ID_BIT, seed=0)
    assert not r.accepted and r.reason == "tag-mismatch"


# -- updates ---------------------------------------------------------------------


def test_add_then_del(store):
    built(store, {"w": ids(2)})
    new = ids(1, 7)[0]
    update(store, ADD, new, ["w", "fresh"], random.Random(4))
    assert search(store, "w").ids == ids(2) + [new]
    assert search(store, "fresh").ids == [new]
    update(store, DEL, new, ["w"], random.Random(5))
    r = search(store, "w")
    assert r.accepted and r.ids == ids(2)
    assert search(store, "fresh").ids == [new]
    assert store.load_owner_state().updates == 2


def test_update_preconditions(store):
    built(store, {"w": ids(2)})
    d = ids(2)[0]
    with pytest.raises(OwnerStateError, match="already added"):
        update(store, ADD, d, ["w"], random.Random(0))
    with pytest.raises(OwnerStateError, match="never added"):
        update(store, DEL, d, ["other"], random.Random(0))
    update(store, DEL, d, ["w"], random.Random(0))
    with pytest.raises(OwnerStateError, match="already deleted"):
        update(store, DEL, d, ["w"], random.Random(0))
    with pytest.raises(OwnerStateError, match="already added"):
        update(store, ADD, d, ["w"], random.Random(0))


def test_update_needs_a_build(store):
    with pytest.raises(OwnerStateError):
        update(store, ADD, ids(1)[0], ["w"], random.Random(0))


def test_stale_cloud_update_detected(store):
    built(store, {"w": ids(1)})
    update(store, ADD, ids(1, 3)[0], ["w"], random.Random(0), Strategy.STALE_IGNORE_UPDATE)
    # the owner's chain head points past what the cloud stored
    r = search(store, "w")
    assert not r.accepted and r.reason == "incomplete-index (add)"
    r = search(store, "w", FORWARD, Strategy.STALE_IGNORE_UPDATE, seed=0)
    assert not r.accepted and r.reason == "count-mismatch (add)"
    with pytest.raises(ResultRejected):
        update(store, ADD, ids(1, 4)[0], ["w"], random.Random(0))


def test_100_updates_match_fresh_build(tmp_path):
    rng = random.Random(100)
    keywords = [f"k{j}" for j in range(6)]
    db = {w: [rng.randbytes(16) for _ in range(rng.randint(1, 3))] for w in keywords}
    live = {w: list(v) for w, v in db.items()}
    store = built(keygen(tmp_path / "a", random.Random(1)), db)
    for step in range(100):
        w = rng.choice(keywords)
        if live[w] and rng.random() < 0.4:
            d = rng.choice(live[w])
            update(store, DEL, d, [w], rng)
            live[w].remove(d)
        else:
            d = rng.randbytes(16)
            update(store, ADD, d, [w], rng)
            live[w].append(d)
    fresh = built(keygen(tmp_path / "b", random.Random(2)), {w: v for w, v in live.items() if v})
    for w in keywords + ["absent"]:
        a, b = search(store, w), search(fresh, w)
        assert a.accepted and b.accepted
        assert a.ids == b.ids == live.get(w, [])
    assert store.load_owner_state().updates == 100


# -- persistence -----------------------------------------------------------------


def test_round_trip_byte_identical(store, rng):
    built(store, random_plain_db(rng, 10, 80))
    update(store, ADD, ids(1, 11)[0], ["k0", "zz"], rng)
    cloud_files = [STATIC_INDEX_FILE, *INDEX_FILES.values(), *TSIG_FILES.values()]
    before = {rel: store.path(rel).read_bytes() for rel in cloud_files}
    state = store.load_owner_state()
    store.save_cloud(store.load_cloud())
    store.save_static_index(store.load_static_index())
    store.save_owner_state(state)
    assert {rel: store.path(rel).read_bytes() for rel in cloud_files} == before
    assert store.load_owner_state() == state


@settings(max_examples=20)
@given(plain_dbs(max_keywords=6, max_ids=6))
def test_keys_and_state_round_trip(db):
    rng = random.Random(7)
    from vdsse.forward import vf_build, vf_keygen, ForwardOwnerState
    from vdsse.static import vs_keygen

    keys = StoreKeys(vf_keygen(rng), vs_keygen(rng))
    again = StoreKeys.from_bytes(keys.to_bytes())
    assert again.to_bytes() == keys.to_bytes()
    _, _, states = vf_build(keys.forward, db, rng)
    state = OwnerState(ForwardOwnerState(add=states), {w: len(v) + 1 for w, v in db.items()}, True, 3)
    assert OwnerState.from_bytes(state.to_bytes()) == state


@pytest.mark.parametrize(
    "rel", [KEYS_FILE, STATE_FILE, PK_FILE, STATIC_INDEX_FILE, INDEX_FILES[ADD], TSIG_FILES[DEL]]
)
def test_corruption_is_a_store_error(store, rel):
    built(store, {"w": ids(2)})
    p = store.path(rel)
    data = bytearray(p.read_bytes())
    data[0] ^= 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(StoreError):
        search(store, "w", STATIC if rel == STATIC_INDEX_FILE else FORWARD)


def test_truncated_and_missing_files(store):
    built(store, {"w": ids(2)})
    p = store.path(TSIG_FILES[ADD])
    p.write_bytes(p.read_bytes()[:-7])
    with pytest.raises(StoreError):
        store.load_cloud()
    p.unlink()
    with pytest.raises(StoreError, match="missing"):
        store.load_cloud()


def test_mismatched_pk_detected(tmp_path):
    a = keygen(tmp_path / "a", random.Random(1))
    b = keygen(tmp_path / "b", random.Random(2))
    a.path(PK_FILE).write_bytes(b.path(PK_FILE).read_bytes())
    with pytest.raises(StoreError, match="does not match"):
        a.load_keys()


def test_state_decode_errors():
    with pytest.raises(DecodeError):
        OwnerState.from_bytes(b"VOST\x01{not json")
    with pytest.raises(DecodeError):
        OwnerState.from_bytes(b"VOST\x02{}")


def test_lock_excludes_second_holder(store):
    with store.locked():
        with pytest.raises(StoreError, match="locked"):
            with Store(store.root).locked(timeout=0.1):
                pass
    with Store(store.root).locked(timeout=0.1):
        pass


def test_file_summary(store):
    sizes = file_summary(store)
    assert all(v > 0 for v in sizes.values())


# -- soundness against the on-disk cloud ---------------------------------------


def test_store_soundness(store, rng):
    built(store, random_plain_db(rng, 8, 40))
    before = {p: p.read_bytes() for p in store.root.rglob("*") if p.is_file()}
    report = store_soundness(store, 10, rng=random.Random(3))
    assert report.ok
    assert report.rows["HONEST"]["accepted"] == report.rows["HONEST"]["searches"] == 20
    for name, row in report.rows.items():
        assert row["forgeries"] == 0, name
    assert report.rows["STALE_IGNORE_UPDATE"]["rejected"] > 0
    # the attack runs on a copy: the store is untouched
    assert {p: p.read_bytes() for p in store.root.rglob("*") if p.is_file()} == before
