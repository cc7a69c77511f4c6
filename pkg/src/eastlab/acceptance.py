"""Self-contained verification battery behind ``eastlab verify``.

Each check re-derives its reference answer on the spot (closed forms,
dense matrix exponentials, a brute-force reachability search) so that a
pass certifies the library against something other than itself.  Checks
return a CheckResult and never raise on mathematical failure; raising is
reserved for broken plumbing.
"""

from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import dynamics
from .config import Configuration, constraint
from .cutoff import cutoff_curve
from .dynamics import ReplicaEngine, rng_for
from .lattice import Box, Region
from .pathspace import BottleneckQuery, barrier, is_bottleneck, target_box
from .spectral import (
    BlockSpec,
    build_generator,
    dirichlet_eigenvalue,
    hitting_tail,
    spectral_gap,
    star_gap,
    star_knight_gap,
    two_block_check,
    vacancy_event_mask,
)
from .theory import map_fixed_point, theory_exponents


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _result(name: str, t0: float, passed: bool, detail: str) -> CheckResult:
    return CheckResult(name, passed, detail, time.perf_counter() - t0)


def _interval(a: int, b: int) -> Region:
    return Region.from_sites([(i,) for i in range(a, b + 1)])


# ---------------------------------------------------------------------------
# exact generators


def _small_boxes() -> Iterable[Box]:
    for L in range(9):
        yield Box((0,), (L,))
    for a in range(9):
        for b in range(9):
            if (a + 1) * (b + 1) <= 9:
                yield Box((0, 0), (a, b))


def check_generator_exactness() -> CheckResult:
    """Row sums vanish and the stationary flow balances, to 1e-12."""
    t0 = time.perf_counter()
    worst_row = 0.0
    worst_flow = 0.0
    count = 0
    for box in _small_boxes():
        for q in (0.1, 0.3, 0.5):
            gen = build_generator(box, q)
            worst_row = max(worst_row, gen.row_sum_error())
            worst_flow = max(worst_flow, gen.detailed_balance_residual())
            count += 1
    ok = worst_row <= 1e-12 and worst_flow <= 1e-12
    detail = (
        f"{count} generators, max row sum {worst_row:.2e}, "
        f"max reversibility defect {worst_flow:.2e}"
    )
    return _result("generator_exactness", t0, ok and _under(t0, 10.0), detail)


def _under(t0: float, budget: float) -> bool:
    return time.perf_counter() - t0 <= budget


def check_dirichlet_identities() -> CheckResult:
    """Single-site rate, the gap lower bound, and domain monotonicity."""
    t0 = time.perf_counter()
    failures = []
    for q in (0.1, 0.3):
        for box in (Box((0,), (0,)), Box((0, 0), (0, 0))):
            lam = dirichlet_eigenvalue(box, q)
            if abs(lam - q) > 1e-12:
                failures.append(f"single site d={box.region().dim}: {lam!r}")
    box = Box.cube(2, 1)
    corner = (1, 1)
    free = [(0, 1), (1, 0)]
    for q in (0.1, 0.3):
        lam_box = dirichlet_eigenvalue(box, q)
        gap = spectral_gap(box.region(), q).gap
        if lam_box < q * gap - 1e-10:
            failures.append(f"gap bound q={q}: {lam_box} < {q * gap}")
        # every sub-domain through the endpoints relaxes no faster
        for keep in range(4):
            sites = [(0, 0), corner]
            for j, s in enumerate(free):
                if keep >> j & 1:
                    sites.append(s)
            lam_v = dirichlet_eigenvalue(
                Region.from_sites(sites), q, target=corner
            )
            if lam_box < lam_v - 1e-10:
                failures.append(f"monotonicity q={q} V={sites}: {lam_v}")
    ok = not failures
    detail = "; ".join(failures) if failures else "all identities hold"
    return _result("dirichlet_identities", t0, ok and _under(t0, 30.0), detail)


def check_stationary_tail_bound() -> CheckResult:
    """Exact survival from equilibrium stays under exp(-lambda t)."""
    t0 = time.perf_counter()
    box = Box.cube(2, 1)
    q = 0.3
    gen = build_generator(box, q)
    lam = dirichlet_eigenvalue(box, q)
    ts = np.linspace(0.0, 40.0, 50)
    tail = hitting_tail(gen, vacancy_event_mask(gen, (1, 1)), gen.mu, ts)
    margin = np.exp(-lam * ts) - tail
    worst = float(margin.min())
    ok = worst >= 0.0
    detail = f"min margin {worst:.3e} over 50 grid points, rate {lam:.6f}"
    return _result("stationary_tail_bound", t0, ok and _under(t0, 10.0), detail)


def check_block_gap_equalities() -> CheckResult:
    """Star-form assembly reproduces directly computed gaps."""
    t0 = time.perf_counter()
    errs = []

    spec = BlockSpec.single_bits(_interval(0, 2).sites, 0.35)
    errs.append(abs(star_gap(spec).gap - spectral_gap(_interval(0, 2), 0.35).gap))

    words = BlockSpec.bit_blocks([(0,), (1,), (2,)], 0.2, width=2)
    errs.append(
        abs(star_gap(words).gap - spectral_gap(_interval(0, 2), words.q_active).gap)
    )

    flat = Box.cube(2, 1).region()
    errs.append(
        abs(star_gap(BlockSpec.single_bits(flat.sites, 0.2)).gap
            - spectral_gap(flat, 0.2).gap)
    )

    knight = BlockSpec.single_bits([(0, 0), (2, 1)], 0.3, adjacency="knight")
    image = Region.from_sites([(0, 0), (1, 0)])
    errs.append(
        abs(star_knight_gap(knight, Box((0, 0), (2, 2))).gap
            - spectral_gap(image, 0.3).gap)
    )

    worst = max(errs)
    ok = worst <= 1e-9
    detail = f"4 instances, max |gap difference| {worst:.2e}"
    return _result("block_gap_equalities", t0, ok and _under(t0, 60.0), detail)


def check_two_block_bound() -> CheckResult:
    """The two-block comparison inequality holds on a spread of instances."""
    t0 = time.perf_counter()
    flat = Box.cube(2, 1).region()
    long2 = Box((0, 0), (2, 1)).region()
    cases = [
        (_interval(0, 1), _interval(2, 2), (1,), 0.15),
        (_interval(0, 1), _interval(2, 2), (1,), 0.3),
        (_interval(0, 1), _interval(2, 2), (1,), 0.5),
        (_interval(0, 1), _interval(2, 3), (1,), 0.2),
        (_interval(0, 1), _interval(2, 3), (1,), 0.4),
        (_interval(0, 2), _interval(3, 4), (2,), 0.2),
        (_interval(0, 2), _interval(3, 4), (2,), 0.4),
        (_interval(0, 3), _interval(4, 5), (3,), 0.3),
        (flat, Region.from_sites([(2, 0), (2, 1)]), (1, 0), 0.3),
        (flat, Region.from_sites([(0, 2), (1, 2)]), (0, 1), 0.35),
        (long2, Region.from_sites([(3, 0), (3, 1)]), (2, 0), 0.25),
    ]
    n_fail = 0
    slack = math.inf
    for v1, v2, z, q in cases:
        res = two_block_check(v1, v2, z, q)
        slack = min(slack, res.lhs - res.rhs)
        if not res.passed:
            n_fail += 1
    ok = n_fail == 0
    detail = f"{len(cases)} instances, {n_fail} failures, min lhs-rhs {slack:.3e}"
    return _result("two_block_bound", t0, ok and _under(t0, 60.0), detail)


# ---------------------------------------------------------------------------
# simulation against exact transients


def _corner_samples(replicas: int, seed: int, q: float):
    """Hitting times of the far corner of the 2x2 box plus origin taus."""
    region = Box.cube(2, 1).region()
    static, lower, upper = dynamics._finite_tables(region, None)
    engine = ReplicaEngine(
        region,
        q,
        static,
        lower,
        upper,
        np.ones(region.size, dtype=np.uint8),
        None,
        region.rank((1, 1)),
        10_000_000,
    )
    corner = np.empty(replicas)
    origin = np.empty(replicas)
    o_rank = region.rank((0, 0))
    for r in range(replicas):
        _, t_end, _ = engine.run(rng_for(seed, r))
        corner[r] = t_end
        origin[r] = engine.tau[o_rank]
    return corner, origin


def _ks_against(sorted_samples: np.ndarray, cdf: np.ndarray) -> float:
    n = len(sorted_samples)
    grid = np.arange(n, dtype=float)
    upper = float(np.max((grid + 1.0) / n - cdf))
    lower = float(np.max(cdf - grid / n))
    return max(upper, lower)


def check_simulator_vs_exact(
    replicas: int = 100_000, seed: int = 606, threshold: float = 0.01
) -> CheckResult:
    """Sampled hitting laws agree with transient solves and a closed form."""
    t0 = time.perf_counter()
    q = 0.3
    corner, origin = _corner_samples(replicas, seed, q)

    corner.sort()
    gen = build_generator(Box.cube(2, 1), q)
    mask = vacancy_event_mask(gen, (1, 1))
    start = Configuration.all_ones(Box.cube(2, 1).region())
    cdf = np.empty(replicas)
    step = 10_000
    for lo in range(0, replicas, step):
        chunk = corner[lo : lo + step]
        cdf[lo : lo + len(chunk)] = 1.0 - hitting_tail(gen, mask, start, chunk)
    d_corner = _ks_against(corner, cdf)

    origin.sort()
    d_origin = _ks_against(origin, 1.0 - np.exp(-q * origin))

    ok = d_corner <= threshold and d_origin <= threshold
    detail = (
        f"{replicas} replicas, KS corner {d_corner:.4f}, "
        f"KS origin vs rate-q exponential {d_origin:.4f} (threshold {threshold:g})"
    )
    return _result("simulator_vs_exact", t0, ok and _under(t0, 120.0), detail)


def check_anisotropy_ordering(replicas: int = 200) -> CheckResult:
    """At small q the diagonal is reached well before the axis point."""
    t0 = time.perf_counter()
    q = 0.04
    diag = dynamics.mean_hitting((30, 30), q, replicas=replicas, seed=707)
    axis = dynamics.mean_hitting((60, 0), q, replicas=replicas, seed=708)
    gap = axis.mean - diag.mean
    sep = gap / math.hypot(axis.stderr, diag.stderr)
    ok = diag.mean < axis.mean and sep >= 5.0
    detail = (
        f"mean tau(30,30) = {diag.mean:.1f} +- {diag.stderr:.1f}, "
        f"mean tau(60,0) = {axis.mean:.1f} +- {axis.stderr:.1f}, "
        f"separation {sep:.1f} stderr"
    )
    return _result("anisotropy_ordering", t0, ok and _under(t0, 1800.0), detail)


def _axis_tau_matrix(region: Region, axis_sites, q: float, replicas: int, seed: int):
    static, lower, upper = dynamics._finite_tables(region, None)
    engine = ReplicaEngine(
        region,
        q,
        static,
        lower,
        upper,
        np.ones(region.size, dtype=np.uint8),
        None,
        region.rank(axis_sites[-1]),
        50_000_000,
    )
    ranks = np.array([region.rank(s) for s in axis_sites])
    out = np.empty((replicas, len(ranks)))
    for r in range(replicas):
        engine.run(rng_for(seed, r))
        out[r] = engine.tau[ranks]
    return out


def check_axis_projection(replicas: int = 10_000) -> CheckResult:
    """Axis infection times in d = 2 match the d = 1 chain site by site."""
    from scipy import stats

    t0 = time.perf_counter()
    q = 0.1
    k_max = 20
    chain = Box((0,), (k_max,)).region()
    strip = Box((0, 0), (k_max, 1)).region()
    taus_1 = _axis_tau_matrix(
        chain, [(k,) for k in range(1, k_max + 1)], q, replicas, 810
    )
    taus_2 = _axis_tau_matrix(
        strip, [(k, 0) for k in range(1, k_max + 1)], q, replicas, 811
    )
    alpha_each = 0.01 / k_max
    min_p = 1.0
    worst_k = 0
    for j in range(k_max):
        p = stats.ks_2samp(taus_1[:, j], taus_2[:, j]).pvalue
        if p < min_p:
            min_p = p
            worst_k = j + 1
    ok = min_p >= alpha_each
    detail = (
        f"{k_max} sites x {replicas} replicas, min p-value {min_p:.4f} "
        f"at k = {worst_k} (reject below {alpha_each:.1e})"
    )
    return _result("axis_projection", t0, ok and _under(t0, 600.0), detail)


# ---------------------------------------------------------------------------
# combinatorics and theory


def _threshold_by_search(region: Region, target) -> int:
    """Least vacancy budget that lets all-ones reach a vacancy at target.

    Plain breadth-first search over explicit configurations, no packing
    and none of the pathspace machinery.
    """
    t_rank = region.rank(target)
    for cap in range(1, region.size + 1):
        start = Configuration.all_ones(region)
        seen = {start.bits}
        frontier = [start]
        while frontier:
            nxt = []
            for w in frontier:
                if w.is_vacant(target):
                    return cap
                for x in region.sites:
                    if not constraint(w, x):
                        continue
                    for bit in (0, 1):
                        y = w.with_value(x, bit)
                        if y.bits in seen or y.vacancy_count > cap:
                            continue
                        seen.add(y.bits)
                        nxt.append(y)
            frontier = nxt
    raise AssertionError("search exhausted without reaching the target")


def check_barrier_bottleneck() -> CheckResult:
    """Minimax vacancy counts match brute force; cut sets classify right."""
    t0 = time.perf_counter()
    failures = []
    for L in range(1, 5):
        region = Box((0,), (L,)).region()
        got = barrier(region, (L,))
        want = _threshold_by_search(region, (L,))
        if got != want:
            failures.append(f"L={L}: barrier {got} vs search {want}")

    k_corner = barrier(Box((0, 0), (1, 1)).region(), (1, 1))
    level = BottleneckQuery(
        (1, 1), 2, lambda w: w.vacancy_count >= k_corner
    )
    if not is_bottleneck(level):
        failures.append("peak-level set not recognised as a cut")
    above = BottleneckQuery(
        (1, 1), 2, lambda w: w.vacancy_count >= k_corner + 1
    )
    if is_bottleneck(above):
        failures.append("set above the peak wrongly called a cut")
    sidestep = BottleneckQuery((1, 1), 2, lambda w: w.is_vacant((1, 0)))
    if is_bottleneck(sidestep):
        failures.append("avoidable set wrongly called a cut")

    ok = not failures
    detail = "; ".join(failures) if failures else (
        f"barriers 1..4 match search, cut classification correct (peak {k_corner})"
    )
    return _result("barrier_bottleneck", t0, ok and _under(t0, 60.0), detail)


def check_theory_functions() -> CheckResult:
    """Fixed points converge tightly and limiting exponents are exact."""
    t0 = time.perf_counter()
    failures = []
    for d in range(2, 6):
        res = map_fixed_point(d)
        if abs(res.value - 1.0 / d) > 1e-6 or res.steps > 200:
            failures.append(f"d={d}: value {res.value!r} in {res.steps} steps")
    flat = theory_exponents(2, beta=0.0, alpha=0.25)
    steep = theory_exponents(2, beta=1.0, alpha=0.25)
    if flat["outstretched_bound"] != 0.5:
        failures.append(f"beta=0 bound {flat['outstretched_bound']!r}")
    if steep["outstretched_bound"] != 1.0:
        failures.append(f"beta=1 bound {steep['outstretched_bound']!r}")
    if flat["near_axis"] != 1.0:
        failures.append(f"alpha=1/4 exponent {flat['near_axis']!r}")
    ok = not failures
    detail = "; ".join(failures) if failures else (
        "fixed points within 1e-6 for d = 2..5, boundary exponents exact"
    )
    return _result("theory_functions", t0, ok and _under(t0, 1.0), detail)


def check_cutoff_curve() -> CheckResult:
    """The eigensolver curve agrees with dense matrix exponentials."""
    from scipy.linalg import expm

    t0 = time.perf_counter()
    q = 0.3
    ts = np.linspace(0.0, 100.0, 26)
    curve = cutoff_curve(1, 2, q, ts, mode="exact")
    vals = curve.values

    gen = build_generator(Box.cube(2, 1), q)
    dense = gen.matrix.toarray()
    oracle = np.empty_like(ts)
    for j, t in enumerate(ts):
        rows = expm(t * dense)
        oracle[j] = 0.5 * np.abs(rows - gen.mu[None, :]).sum(axis=1).max()

    failures = []
    if np.any(np.diff(vals) > 1e-12):
        failures.append("curve increases somewhere")
    if abs(vals[0] - (1.0 - q ** 4)) > 1e-10:
        failures.append(f"start {vals[0]!r}")
    if vals[-1] >= 1e-3:
        failures.append(f"end {vals[-1]:.2e} not below 1e-3")
    dev = float(np.abs(vals - oracle).max())
    if dev > 1e-7:
        failures.append(f"oracle deviation {dev:.2e}")
    ok = not failures
    detail = "; ".join(failures) if failures else (
        f"26 grid points, max deviation from expm {dev:.2e}, end {vals[-1]:.2e}"
    )
    return _result("cutoff_curve", t0, ok and _under(t0, 60.0), detail)


def check_cli_reproducibility() -> CheckResult:
    """Reruns from an embedded config reproduce output byte for byte."""
    from . import cli

    t0 = time.perf_counter()
    failures = []
    with tempfile.TemporaryDirectory() as td:
        runs = [
            (
                "simulate",
                ["simulate", "--d", "2", "--q", "0.3", "--seed", "11",
                 "--replicas", "4", "--t-max", "25.0"],
            ),
            (
                "velocity",
                ["velocity", "--d", "1", "--q", "0.25", "--direction", "1",
                 "--n-grid", "4:12:4", "--replicas", "6", "--seed", "7"],
            ),
        ]
        for label, argv in runs:
            first = os.path.join(td, label + "_first")
            second = os.path.join(td, label + "_again")
            rc1 = cli.main(argv + ["--out", first])
            rc2 = cli.main(
                [argv[0], "--config", os.path.join(first, "summary.json"),
                 "--out", second]
            )
            if rc1 != 0 or rc2 != 0:
                failures.append(f"{label}: exit codes {rc1}/{rc2}")
                continue
            with open(os.path.join(first, "results.csv"), "rb") as fh:
                a = fh.read()
            with open(os.path.join(second, "results.csv"), "rb") as fh:
                b = fh.read()
            if a != b:
                failures.append(f"{label}: results.csv differs on rerun")
    ok = not failures
    detail = "; ".join(failures) if failures else (
        "simulate and velocity reruns byte-identical"
    )
    return _result("cli_reproducibility", t0, ok, detail)


# ---------------------------------------------------------------------------
# suites

FULL_SUITE: tuple[tuple[str, Callable[[], CheckResult]], ...] = (
    ("generator_exactness", check_generator_exactness),
    ("dirichlet_identities", check_dirichlet_identities),
    ("stationary_tail_bound", check_stationary_tail_bound),
    ("block_gap_equalities", check_block_gap_equalities),
    ("two_block_bound", check_two_block_bound),
    ("simulator_vs_exact", check_simulator_vs_exact),
    ("anisotropy_ordering", check_anisotropy_ordering),
    ("axis_projection", check_axis_projection),
    ("barrier_bottleneck", check_barrier_bottleneck),
    ("theory_functions", check_theory_functions),
    ("cutoff_curve", check_cutoff_curve),
    ("cli_reproducibility", check_cli_reproducibility),
)

SMALL_SUITE: tuple[tuple[str, Callable[[], CheckResult]], ...] = (
    ("generator_exactness", check_generator_exactness),
    ("dirichlet_identities", check_dirichlet_identities),
    ("stationary_tail_bound", check_stationary_tail_bound),
    ("block_gap_equalities", check_block_gap_equalities),
    ("two_block_bound", check_two_block_bound),
    # a fifth of the replicas: KS noise grows like replicas**-0.5, so the
    # cutoff widens by sqrt(5) to keep the full tier's false-alarm rate
    ("simulator_vs_exact", lambda: check_simulator_vs_exact(replicas=20_000, threshold=0.0224)),
    ("barrier_bottleneck", check_barrier_bottleneck),
    ("theory_functions", check_theory_functions),
    ("cutoff_curve", check_cutoff_curve),
    ("cli_reproducibility", check_cli_reproducibility),
)


def run_suite(suite: str = "full", names=None) -> list[CheckResult]:
    """Run the named checks (or a whole suite) and collect their results."""
    if suite not in ("full", "small"):
        raise ValueError("suite must be 'full' or 'small'")
    table = FULL_SUITE if suite == "full" else SMALL_SUITE
    if names is not None:
        known = {n for n, _ in table}
        bad = sorted(set(names) - known)
        if bad:
            raise ValueError(f"unknown checks: {', '.join(bad)}")
        table = tuple((n, f) for n, f in table if n in set(names))
    return [func() for _, func in table]


def format_results(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name}: {mark} ({r.detail}) [{r.seconds:.1f}s]")
    n_bad = sum(not r.passed for r in results)
    lines.append(
        f"{len(results) - n_bad}/{len(results)} checks passed"
        if n_bad
        else f"all {len(results)} checks passed"
    )
    return "\n".join(lines)
