"""Run the malicious-cloud game and print per-strategy tallies.

    python scripts/run_soundness.py --trials 100 --seed 1
    python scripts/run_soundness.py --trials 200 --transcript-dir out/
"""

import argparse
import random
import sys
from pathlib import Path

from vdsse.sim import Strategy, WorkloadConfig, random_db, random_script, run_session, soundness_suite


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keywords", type=int, default=5)
    p.add_argument("--docs", type=int, default=8)
    p.add_argument("--transcript-dir", type=Path, default=None, help="also dump one JSONL transcript per strategy")
    args = p.parse_args(argv)

    cfg = WorkloadConfig(n_keywords=args.keywords, n_docs=args.docs)
    report = soundness_suite(args.trials, random.Random(args.seed), cfg=cfg)
    for line in report.lines():
        print(line)
    print("SOUND" if report.ok else "UNSOUND")

    if args.transcript_dir:
        args.transcript_dir.mkdir(parents=True, exist_ok=True)
        for strategy in Strategy:
            rng = random.Random(args.seed)
            db = random_db(rng, cfg.n_keywords, cfg.n_docs)
            t = run_session(db, random_script(rng, db, cfg), strategy, rng, adversary_seed=args.seed)
            (args.transcript_dir / f"{strategy.value}.jsonl").write_text(t.to_jsonl())
        print(f"transcripts written to {args.transcript_dir}")
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
