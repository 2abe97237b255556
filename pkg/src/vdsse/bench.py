"""Per-role cost of one forward-scheme search as the result size grows.

For each size ``n`` a synthetic db with a single keyword of ``n`` postings is
built; the search is then timed per role over ``reps`` repetitions and the
median kept; each repetition averages a batch of calls so that short
operations are not lost in timer noise.  Operation counts come from :mod:`vdsse.metrics` and are exact.
"""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import asdict, dataclass, field

from . import metrics
from .crypto import G1_BYTES, encode_g1, encode_scalar
from .forward import vf_audit, vf_build, vf_cloud_search, vf_keygen, vf_owner_proof, vf_search_token
from .sse import DOC_ID_BYTES

KEYWORD = "bench"


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = (1, 10, 100, 250)
    reps: int = 5
    seed: int = 0
    min_time: float = 5e-3  # per-repetition batch length, seconds

    def __post_init__(self):
        if not self.sizes or min(self.sizes) < 1:
            raise ValueError("sizes must be >= 1")
        if self.reps < 5:
            raise ValueError("at least 5 repetitions are required")


@dataclass
class BenchRow:
    size: int
    owner_s: float
    cloud_s: float
    auditor_s: float
    proof_bytes: int
    tsig_entries: int
    pairings: int
    scalar_muladds: int
    tsig_lookups: int
    group_muls: int


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def owner_fit(self) -> tuple[float, float, float]:
        """Least-squares (slope, intercept, r^2) of owner time against size."""
        xs, ys = self.column("size"), self.column("owner_s")
        if len(set(xs)) < 2:
            return 0.0, ys[0], 1.0
        slope, intercept = statistics.linear_regression(xs, ys)
        r = statistics.correlation(xs, ys) if len(set(ys)) > 1 else 1.0
        return slope, intercept, r * r

    def auditor_spread(self) -> float:
        """max/min ratio of the auditor medians; 1.0 is perfectly flat."""
        ts = self.column("auditor_s")
        return max(ts) / min(ts)

    def proof_bytes_constant(self) -> bool:
        return len(set(self.column("proof_bytes"))) == 1

    def table(self) -> str:
        head = (
            f"{'|R_w|':>6} {'owner_ms':>10} {'cloud_ms':>10} {'auditor_ms':>11} "
            f"{'proof_B':>8} {'tsig':>6} {'pair':>5} {'muladd':>7} {'lookup':>7} {'gmul':>5}"
        )
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.size:>6} {r.owner_s * 1e3:>10.3f} {r.cloud_s * 1e3:>10.3f} {r.auditor_s * 1e3:>11.3f} "
                f"{r.proof_bytes:>8} {r.tsig_entries:>6} {r.pairings:>5} {r.scalar_muladds:>7} "
                f"{r.tsig_lookups:>7} {r.group_muls:>5}"
            )
        slope, _, r2 = self.owner_fit()
        lines.append(
            f"owner slope {slope * 1e6:.2f} us/result (r^2={r2:.3f}); "
            f"auditor spread x{self.auditor_spread():.2f}; "
            f"proof bytes constant: {self.proof_bytes_constant()}"
        )
        return "\n".join(lines)

    def to_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def _per_call(fn, min_time: float) -> float:
    """Mean wall-clock seconds per call over a batch lasting ``min_time``."""
    calls, t0 = 0, time.perf_counter()
    while True:
        fn()
        calls += 1
        elapsed = time.perf_counter() - t0
        if elapsed >= min_time:
            return elapsed / calls


def bench_size(n: int, reps: int, rng: random.Random, min_time: float = 5e-3) -> BenchRow:
    keys = vf_keygen(rng)
    ids = [rng.randbytes(DOC_ID_BYTES) for _ in range(n)]
    index, tsig, states = vf_build(keys, {KEYWORD: ids}, rng)
    state = states[KEYWORD]

    # one counted pass; the counters are exact, so once is enough
    with metrics.counting() as ops:
        token, tag = vf_search_token(keys, KEYWORD, state)
        results, pf_c = vf_cloud_search(index, tsig, token, tag)
        pf_o = vf_owner_proof(keys, KEYWORD, results, state.counter)
        proof = encode_g1(pf_c) + encode_scalar(pf_o)
        ok = vf_audit(keys.pk, proof[G1_BYTES:], proof[:G1_BYTES])
    if not ok or [d for d, _ in results] != ids:
        raise AssertionError(f"honest benchmark search failed at size {n}")

    def owner():
        vf_search_token(keys, KEYWORD, state)
        vf_owner_proof(keys, KEYWORD, results, state.counter)

    def cloud():
        vf_cloud_search(index, tsig, token, tag)

    def auditor():
        vf_audit(keys.pk, proof[G1_BYTES:], proof[:G1_BYTES])

    times: dict[str, list[float]] = {"owner": [], "cloud": [], "auditor": []}
    for _ in range(reps):
        for name, fn in (("owner", owner), ("cloud", cloud), ("auditor", auditor)):
            times[name].append(_per_call(fn, min_time))
    return BenchRow(
        size=n,
        owner_s=statistics.median(times["owner"]),
        cloud_s=statistics.median(times["cloud"]),
        auditor_s=statistics.median(times["auditor"]),
        proof_bytes=len(proof),
        tsig_entries=len(tsig),
        pairings=ops[metrics.PAIRING],
        scalar_muladds=ops[metrics.SCALAR_MULADD],
        tsig_lookups=ops[metrics.TSIG_LOOKUP],
        group_muls=ops[metrics.GROUP_MUL],
    )


def run_bench(cfg: BenchConfig = BenchConfig()) -> BenchReport:
    rng = random.Random(cfg.seed)
    return BenchReport([bench_size(n, cfg.reps, rng, cfg.min_time) for n in cfg.sizes])
