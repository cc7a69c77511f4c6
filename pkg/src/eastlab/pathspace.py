"""Legal-path combinatorics on configuration space.

Configurations on a finite region form a graph whose edges are single-site
flips allowed by the facilitation rule. Because the rule never reads the
flipping site's own value, every edge is traversable in both directions, so
reachability questions have no orientation subtleties. This module walks that
graph: plain reachability with witness paths, the minimal peak vacancy count
needed to infect a chosen site, and cut-set ("no path avoids A") checks with
their stationary measure.

State packing matches the spectral module: bit i of a packed integer is the
occupation of the region's i-th site in lexicographic order.
"""

import heapq
import json
from dataclasses import dataclass
from math import floor, log2, sqrt
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .config import BoundaryCondition, Configuration
from .dynamics import rng_for, run_trajectory
from .errors import BudgetExceededError, SizeCapError, UnreachableTargetError
from .lattice import Box, Region, Site
from .spectral.generator import build_generator, constraint_tables, stationary_vector
from .spectral.transient import hitting_tail, vacancy_event_mask

SITE_CAP = 24

Predicate = Callable[[Configuration], bool]
Target = Union[Configuration, Predicate]


def _check_cap(region: Region) -> None:
    if region.size > SITE_CAP:
        raise SizeCapError(
            f"{region.size} sites exceed the {SITE_CAP}-site path-search cap"
        )


def _legal_ranks(state: int, static, masks, n: int):
    for i in range(n):
        m = int(masks[i])
        if static[i] or (state & m) != m:
            yield i


def _as_predicate(region: Region, target: Target):
    if isinstance(target, Configuration):
        if target.region != region:
            raise ValueError("target configuration lives on a different region")
        goal = target.bits
        return lambda s: s == goal
    return lambda s: bool(target(Configuration(region, s)))


@dataclass(frozen=True)
class ReachabilityResult:
    """Outcome of a breadth-first search from one configuration.

    path is a list of (site, new bit) flips transforming the start into the
    first matching state; it is None when nothing matched and empty when the
    start itself matches. visited counts distinct states expanded, so a
    never-true target turns the search into a census of the component.
    """

    found: bool
    path: Optional[list]
    visited: int


def reachable(
    region: Region,
    start: Configuration,
    target: Target,
    sigma: Optional[BoundaryCondition] = None,
) -> ReachabilityResult:
    """Breadth-first search for a target state or predicate.

    target may be a Configuration (exact state) or a callable judging a
    Configuration. The witness path, when found, is minimal in flip count.
    """
    _check_cap(region)
    if start.region != region:
        raise ValueError("start configuration lives on a different region")
    static, masks = constraint_tables(region, sigma)
    n = region.size
    hit = _as_predicate(region, target)
    s0 = start.bits
    if hit(s0):
        return ReachabilityResult(True, [], 1)
    parent = {s0: None}
    frontier = [s0]
    while frontier:
        nxt = []
        for s in frontier:
            for i in _legal_ranks(s, static, masks, n):
                t = s ^ (1 << i)
                if t in parent:
                    continue
                parent[t] = (s, i)
                if hit(t):
                    return ReachabilityResult(
                        True, _unwind(parent, t, region), len(parent)
                    )
                nxt.append(t)
        frontier = nxt
    return ReachabilityResult(False, None, len(parent))


def _unwind(parent: dict, state: int, region: Region) -> list:
    steps = []
    while parent[state] is not None:
        prev, i = parent[state]
        steps.append((region.sites[i], (state >> i) & 1))
        state = prev
    steps.reverse()
    return steps


def save_witness(steps: Sequence, fp) -> None:
    """Write a flip sequence as JSON: a list of [site, new bit] pairs."""
    payload = [[list(map(int, site)), int(bit)] for site, bit in steps]
    if hasattr(fp, "write"):
        json.dump(payload, fp)
    else:
        with open(fp, "w") as fh:
            json.dump(payload, fh)


def barrier(
    region: Region, target: Site, sigma: Optional[BoundaryCondition] = None
) -> int:
    """Minimal peak vacancy count over legal paths infecting the target.

    Starts from all-ones and minimises, over paths that end in a state with
    the target vacant, the maximum simultaneous number of vacancies in the
    region along the way. The count includes the target's own vacancy at the
    step creating it. Exact via a best-first search ordered by that peak.
    """
    _check_cap(region)
    target = tuple(int(c) for c in target)
    if target not in region:
        raise ValueError(f"target {target} is not in the region")
    static, masks = constraint_tables(region, sigma)
    n = region.size
    tb = region.rank(target)
    full = (1 << n) - 1
    best = {full: 0}
    heap = [(0, full)]
    while heap:
        cost, s = heapq.heappop(heap)
        if cost > best.get(s, cost):
            continue
        if not (s >> tb) & 1:
            return cost
        for i in _legal_ranks(s, static, masks, n):
            t = s ^ (1 << i)
            c = max(cost, n - t.bit_count())
            if c < best.get(t, n + 1):
                best[t] = c
                heapq.heappush(heap, (c, t))
    raise UnreachableTargetError(
        f"no legal path from all-ones reaches a vacancy at {target}"
    )


def target_box(x: Site, L: int) -> Region:
    """Side-L box whose upper corner is x, clipped to the quadrant."""
    if L < 1:
        raise ValueError("box side must be at least 1")
    x = tuple(int(c) for c in x)
    if any(c < 0 for c in x):
        raise ValueError("corner must lie in the quadrant")
    lo = tuple(max(0, c - L + 1) for c in x)
    return Box(lo, tuple(c - a for c, a in zip(x, lo))).region()


@dataclass(frozen=True)
class BottleneckQuery:
    """A cut-set question on the box hanging below a target site.

    The chosen set A is a predicate over configurations of target_box(x, L);
    the question is whether every legal path from all-ones to a vacancy at x
    meets A. Checked under the fully vacant boundary condition, which only
    helps paths and so makes the answer conservative.
    """

    x: Site
    L: int
    inside: Predicate

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(c) for c in self.x))
        if self.L < 1:
            raise ValueError("box side must be at least 1")

    @property
    def d(self) -> int:
        return len(self.x)

    def region(self) -> Region:
        return target_box(self.x, self.L)


def is_bottleneck(query: BottleneckQuery) -> bool:
    """True iff no legal path from all-ones to a vacancy at x avoids A.

    Runs reachability in the graph with A's states deleted: the target is a
    bottleneck exactly when the vacancy event is unreachable there. States in
    A are never entered, so a target state lying inside A does not count as
    an escape.
    """
    region = query.region()
    _check_cap(region)
    sigma = BoundaryCondition.maximal(region)
    static, masks = constraint_tables(region, sigma)
    n = region.size
    tb = region.rank(query.x)
    full = (1 << n) - 1
    if query.inside(Configuration(region, full)):
        return True
    seen = {full}
    stack = [full]
    while stack:
        s = stack.pop()
        if not (s >> tb) & 1:
            return False
        for i in _legal_ranks(s, static, masks, n):
            t = s ^ (1 << i)
            if t in seen:
                continue
            seen.add(t)
            if not query.inside(Configuration(region, t)):
                stack.append(t)
    return True


@dataclass(frozen=True)
class BottleneckMeasure:
    """Exact stationary mass of a chosen set, with an optional reference.

    The reference exponent, available when the box side L and dimension d are
    supplied, is n*log2(1/q) - d*n*(n-1)/2 with n = floor(log2 L). It is a
    scale for comparison only: nothing asserts that a particular A comes
    close to it.
    """

    mu: float
    reference_exponent: Optional[float] = None

    @property
    def reference_bound(self) -> Optional[float]:
        if self.reference_exponent is None:
            return None
        return 2.0 ** (-self.reference_exponent)


def bottleneck_measure(
    inside: Predicate,
    region: Region,
    q: float,
    d: Optional[int] = None,
    L: Optional[int] = None,
) -> BottleneckMeasure:
    """Stationary measure of {omega : inside(omega)} by exact enumeration."""
    _check_cap(region)
    if not 0.0 < q < 1.0:
        raise ValueError(f"vacancy density must lie in (0, 1), got {q}")
    w = stationary_vector(region.size, q)
    mu = 0.0
    for s in range(1 << region.size):
        if inside(Configuration(region, s)):
            mu += float(w[s])
    expo = None
    if d is not None and L is not None:
        n = floor(log2(L)) if L > 1 else 0
        expo = n * log2(1.0 / q) - d * n * (n - 1) / 2.0
    return BottleneckMeasure(mu, expo)


@dataclass(frozen=True)
class EscapeEstimate:
    """Monte Carlo estimate of infecting x before time t from a packed start.

    Replicas start all-ones on target_box(x, L) with the rest of the lower
    box drawn from the stationary product measure. probability carries a
    Wilson 95% interval; reference_exponent is the same comparison scale as
    in BottleneckMeasure, to be set against an O(t) prefactor by the caller.
    """

    probability: float
    ci_low: float
    ci_high: float
    hits: int
    replicas: int
    x: Site
    L: int
    q: float
    t: float
    reference_exponent: float


def _wilson(hits: int, n: int, z: float = 1.959963984540054) -> tuple:
    ph = hits / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (ph + z2 / (2 * n)) / denom
    half = z * sqrt(ph * (1 - ph) / n + z2 / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def escape_probability(
    x: Site,
    L: int,
    q: float,
    t: float,
    replicas: int,
    seed: int = 0,
    max_events_per_replica: int = 50_000_000,
) -> EscapeEstimate:
    """Estimate P(vacancy reaches x before t) from an all-ones box at x.

    The infection time of x depends only on the sites below it, so each
    replica simulates the finite lower box: all-ones on target_box(x, L),
    the remaining sites sampled from the stationary product measure. Replica
    r draws its start from stream 2r+1 and its trajectory from stream 2r of
    the given seed.
    """
    x = tuple(int(c) for c in x)
    if any(c < 0 for c in x):
        raise ValueError("target must lie in the quadrant")
    if t < 0:
        raise ValueError("time horizon must be nonnegative")
    if replicas < 1:
        raise ValueError("need at least one replica")
    n = floor(log2(L)) if L > 1 else 0
    expo = n * log2(1.0 / q) - len(x) * n * (n - 1) / 2.0
    if t == 0.0:
        return EscapeEstimate(0.0, 0.0, 0.0, 0, replicas, x, L, q, t, expo)
    box = Box(tuple(0 for _ in x), x)
    inner = target_box(x, L)
    exterior = [s for s in box.region().sites if s not in inner]
    hits = 0
    for r in range(replicas):
        cfg = Configuration.all_ones(box.region())
        if exterior:
            samp = rng_for(seed, 2 * r + 1)
            draws = samp.random(len(exterior))
            for site, u in zip(exterior, draws):
                if u < q:
                    cfg = cfg.flipped(site)
        try:
            run = run_trajectory(
                box,
                q,
                seed=seed,
                replica=2 * r,
                t_max=t,
                stop_when_vacant=x,
                initial=cfg,
                max_events=max_events_per_replica,
            )
        except BudgetExceededError as err:
            err.completed = r
            raise
        if run.stopped == "target":
            hits += 1
    lo, hi = _wilson(hits, replicas)
    return EscapeEstimate(
        hits / replicas, lo, hi, hits, replicas, x, L, q, t, expo
    )


def escape_oracle(x: Site, L: int, q: float, t: float) -> float:
    """Exact escape probability on the lower box via the transient solver.

    Builds the same initial law escape_probability samples from, but as a
    distribution vector, and evaluates the hitting tail in one shot. Only
    feasible when the lower box is small enough for the dense state space.
    """
    x = tuple(int(c) for c in x)
    box = Box(tuple(0 for _ in x), x)
    region = box.region()
    if region.size > SITE_CAP:
        raise SizeCapError(f"lower box has {region.size} sites")
    inner = target_box(x, L)
    gen = build_generator(region, q)
    nst = 1 << region.size
    dist = np.zeros(nst)
    inner_mask = 0
    for s in inner.sites:
        inner_mask |= 1 << region.rank(s)
    p = 1.0 - q
    for s in range(nst):
        if (s & inner_mask) != inner_mask:
            continue
        w = 1.0
        for i, site in enumerate(region.sites):
            if site in inner:
                continue
            w *= p if (s >> i) & 1 else q
        dist[s] = w
    tail = hitting_tail(gen, vacancy_event_mask(gen, x), dist, [t])
    return 1.0 - float(tail[0])
