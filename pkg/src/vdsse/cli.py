"""``vdsse`` command line.

Exit codes: 0 success or ACCEPT, 1 usage or input error, 2 REJECT,
3 store missing pieces or corrupt.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .bench import BenchConfig, run_bench
from .errors import DecodeError, OwnerStateError, StoreError
from .forward import ADD, DEL, ResultRejected
from .service import (
    FORWARD,
    SCHEMES,
    CorpusError,
    build,
    keygen,
    parse_corpus,
    parse_doc_id,
    search,
    store_soundness,
    update,
)
from .sim.adversary import TAMPERING, Strategy
from .sim.session import WorkloadConfig, soundness_suite
from .store import LOCK_FILE, Store

EXIT_OK, EXIT_USAGE, EXIT_REJECT, EXIT_CORRUPT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 means REJECT here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _open_store(path: str) -> Store:
    store = Store(path)
    if not store.root.is_dir():
        raise UsageError(f"no store at {path} (run keygen first)")
    if not store.exists():
        raise StoreError(f"{path} has no owner key file")
    return store


def _rng(seed):
    # a fixed seed makes runs reproducible; without one keys come from the OS
    return random.Random(seed) if seed is not None else None


def cmd_keygen(args) -> int:
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"{out} is not a directory")
    if out.is_dir() and any(f.name != LOCK_FILE for f in out.iterdir()) and not args.force:
        raise UsageError(f"{out} exists and is not empty (use --force)")
    keygen(args.out, _rng(args.seed), force=args.force)
    print(f"store initialised at {args.out}")
    return EXIT_OK


def cmd_build(args) -> int:
    store = _open_store(args.store)
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    db = parse_corpus(text)
    with store.locked():
        state = build(store, db, _rng(args.seed), force=args.force)
    pairs = sum(len(v) for v in db.values())
    print(f"built {len(state.static_counts)} keywords, {pairs} pairs")
    return EXIT_OK


def cmd_search(args) -> int:
    store = _open_store(args.store)
    with store.locked():
        report = search(store, args.keyword, args.scheme, args.adversary, args.adversary_seed)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.accepted else EXIT_REJECT


def _cmd_update(op: str):
    def run(args) -> int:
        store = _open_store(args.store)
        try:
            doc_id = parse_doc_id(args.id)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        with store.locked():
            state = update(store, op, doc_id, args.keywords, _rng(args.seed), args.adversary)
        total = sum(st.counter for st in state.forward.states(op).values())
        print(f"{op} {doc_id.hex()} under {len(args.keywords)} keyword(s); {op} pairs now {total}")
        return EXIT_OK

    return run


def cmd_bench(args) -> int:
    report = run_bench(BenchConfig(tuple(args.sizes), args.reps, args.seed or 0))
    if args.json:
        print(json.dumps(report.to_dicts(), indent=2))
    else:
        print(report.table())
    return EXIT_OK


def cmd_soundness(args) -> int:
    rng = random.Random(args.seed)
    strategies = [Strategy(s) for s in args.strategies] if args.strategies else [Strategy.HONEST, *TAMPERING]
    if args.store:
        store = _open_store(args.store)
        with store.locked():
            report = store_soundness(store, args.trials, strategies, rng)
    else:
        report = soundness_suite(args.trials, rng, strategies, WorkloadConfig())
    for line in report.lines():
        print(line)
    print("SOUND" if report.ok else "UNSOUND")
    return EXIT_OK if report.ok else EXIT_REJECT


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vdsse", description="Verifiable searchable encryption toolkit.")
    p.add_argument("--seed", type=int, default=None, help="deterministic RNG seed (testing only)")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    strategies = [s.value for s in Strategy]

    k = sub.add_parser("keygen", help="create a store with fresh keys")
    k.add_argument("out")
    k.add_argument("--force", action="store_true", help="overwrite a non-empty directory")
    k.set_defaults(func=cmd_keygen)

    b = sub.add_parser("build", help="encrypt a keyword<TAB>ids corpus into the store")
    b.add_argument("store")
    b.add_argument("input")
    b.add_argument("--force", action="store_true", help="replace an existing corpus")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("search", help="verified search for one keyword")
    s.add_argument("store")
    s.add_argument("keyword")
    s.add_argument("--scheme", choices=SCHEMES, default=FORWARD)
    s.add_argument("--adversary", choices=strategies, default=None)
    s.add_argument("--adversary-seed", type=int, default=None)
    s.set_defaults(func=cmd_search)

    for op, verb in ((ADD, "add"), (DEL, "del")):
        u = sub.add_parser(verb, help=f"{verb} one document (forward scheme)")
        u.add_argument("store")
        u.add_argument("id", help="32 hex characters")
        u.add_argument("keywords", nargs="+")
        u.add_argument("--adversary", choices=strategies, default=None)
        u.set_defaults(func=_cmd_update(op))

    be = sub.add_parser("bench", help="per-role search cost against result size")
    be.add_argument("--sizes", type=int, nargs="+", default=[1, 10, 100, 250])
    be.add_argument("--reps", type=int, default=5)
    be.add_argument("--json", action="store_true")
    be.set_defaults(func=cmd_bench)

    so = sub.add_parser("soundness", help="run the malicious-cloud game")
    so.add_argument("--trials", type=int, default=20)
    so.add_argument("--strategies", nargs="+", choices=strategies, default=None)
    so.add_argument("--store", default=None, help="attack a copy of this store's cloud files")
    so.set_defaults(func=cmd_soundness)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, bad usage exits EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ResultRejected as exc:
        print(f"REJECT {exc.reason}")
        return EXIT_REJECT
    except (StoreError, DecodeError) as exc:
        print(f"store error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (UsageError, CorpusError, OwnerStateError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
