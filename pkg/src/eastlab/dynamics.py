"""Event-driven simulation of the oriented constrained dynamics.

One rejection-free loop serves both finite regions (with boundary
conditions) and the lazy quadrant started from finitely many vacancies.
Every event consumes exactly three pre-drawn numbers (an exponential for
the waiting time, a uniform for the flip class, a uniform for the member),
and legal sites enter the bookkeeping sets in lexicographic order at start
and in a fixed deterministic order afterwards. Runs on a finite box and on
the lazy quadrant with the same seed therefore produce identical event
lists whenever the box contains every site the lazy run ever tracked.

Rates: a legal particle flips to a vacancy at rate q, a legal vacancy fills
at rate 1 - q. Legality never reads the site's own value, so a flip leaves
the flipped site legal and can only change the legality of its d upper
neighbours.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._kernel import (
    HAVE_KERNEL,
    STATUS_EVENTS,
    STATUS_FROZEN,
    STATUS_TARGET,
    STATUS_TMAX,
    ReplicaEngine,
)
from .config import BoundaryCondition, Configuration
from .errors import BudgetExceededError
from .lattice import Box, Region, Site, neg_log2

__all__ = [
    "IndexedSet",
    "LazyQuadrant",
    "InfectionRecord",
    "SimulationResult",
    "HittingEstimate",
    "VelocityFit",
    "rng_for",
    "run_trajectory",
    "infected_set",
    "mean_hitting",
    "velocity_fit",
    "time_average_occupation",
    "save_trajectory",
    "load_trajectory",
    "infections_to_csv",
]


def rng_for(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent counter-based stream for a (master seed, replica) pair."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((seed, replica)))
    )


class IndexedSet:
    """Set with O(1) add, discard, and uniform pick by swap-with-last.

    Iteration order is insertion order disturbed only by discards, hence
    deterministic for a fixed operation sequence; picks index into the
    backing list directly.
    """

    __slots__ = ("_items", "_pos")

    def __init__(self):
        self._items = []
        self._pos = {}

    def __len__(self):
        return len(self._items)

    def __contains__(self, x):
        return x in self._pos

    def add(self, x):
        if x not in self._pos:
            self._pos[x] = len(self._items)
            self._items.append(x)

    def discard(self, x):
        i = self._pos.pop(x, None)
        if i is None:
            return
        last = self._items.pop()
        if i < len(self._items):
            self._items[i] = last
            self._pos[last] = i

    def pick(self, u: float):
        n = len(self._items)
        i = int(u * n)
        return self._items[i if i < n else n - 1]


class _Draws:
    """Blocks of pre-drawn randomness, three aligned streams per event."""

    __slots__ = ("_rng", "_n", "_exp", "_u1", "_u2", "_i")

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._n = block
        self._refill()

    def _refill(self):
        self._exp = self._rng.standard_exponential(self._n)
        self._u1 = self._rng.random(self._n)
        self._u2 = self._rng.random(self._n)
        self._i = 0

    def next(self):
        i = self._i
        if i == self._n:
            self._refill()
            i = 0
        self._i = i + 1
        return self._exp[i], self._u1[i], self._u2[i]


class LazyQuadrant:
    """Domain token selecting the unbounded quadrant in dimension d."""

    __slots__ = ("d",)

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("dimension must be positive")
        self.d = d


class InfectionRecord(NamedTuple):
    site: Site
    tau: float  # first time the site is vacant; 0.0 if initially vacant
    first_update: float  # first flip at the site; inf if never updated


@dataclass(frozen=True)
class SimulationResult:
    """Outcome of one trajectory run."""

    dim: int
    q: float
    seed: int
    replica: int
    mode: str  # "finite" or "lazy"
    t_end: float
    n_events: int
    stopped: str  # "t_max", "target", or "events"
    events: list | None  # (t, site, new_value) if recorded
    infections: dict  # site -> InfectionRecord
    initial_vacancies: frozenset
    tracked_extent: Site  # componentwise max over all sites ever tracked
    domain_lengths: Site | None  # box lengths for finite runs

    def infection_records(self) -> list[InfectionRecord]:
        return [self.infections[s] for s in sorted(self.infections)]


def _finite_tables(region: Region, sigma: BoundaryCondition | None):
    """Rank-indexed neighbour tables mirroring the constraint rule."""
    from .lattice import lower_neighbors, upper_neighbors

    n = region.size
    static = [False] * n
    lower = [[] for _ in range(n)]
    upper = [[] for _ in range(n)]
    for i, x in enumerate(region.sites):
        if all(c == 0 for c in x):
            static[i] = True
        else:
            for y in lower_neighbors(x):
                if y in region:
                    lower[i].append(region.rank(y))
                elif sigma is not None and y in sigma and sigma.value_at(y) == 0:
                    static[i] = True
        for y in upper_neighbors(x):
            if y in region:
                upper[i].append(region.rank(y))
    return static, lower, upper


def run_trajectory(
    domain,
    q: float,
    seed: int,
    replica: int = 0,
    t_max: float | None = None,
    max_events: int | None = None,
    stop_when_vacant: Site | None = None,
    initial: Configuration | None = None,
    vacancies=None,
    sigma: BoundaryCondition | None = None,
    record_events: bool = False,
    record_window: Box | None = None,
    _force_pure: bool = False,
) -> SimulationResult:
    """Simulate until a stop condition fires.

    ``domain`` is a Region or Box for the finite chain, or LazyQuadrant(d)
    for the unbounded one. Finite runs start from ``initial`` (default all
    ones); lazy runs start from all ones outside the ``vacancies`` iterable
    (default: a single vacancy at the origin). At least one stop condition
    is required. ``max_events`` alone is a goal; combined with another
    condition it is a budget whose exhaustion raises BudgetExceededError
    with the partial result attached.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"vacancy density must lie in (0, 1), got {q}")
    if t_max is None and max_events is None and stop_when_vacant is None:
        raise ValueError("need t_max, max_events, or stop_when_vacant")
    p = 1.0 - q
    lazy = isinstance(domain, LazyQuadrant)
    budget_is_goal = max_events is not None and (
        t_max is None and stop_when_vacant is None
    )

    infections: dict = {}
    window = record_window

    def _record(site, t, vacant):
        if window is not None and site not in window:
            return
        rec = infections.get(site)
        if rec is None:
            infections[site] = InfectionRecord(
                site, t if vacant else np.inf, t
            )
            return
        tau = t if (vacant and rec.tau == np.inf) else rec.tau
        fu = t if rec.first_update == np.inf else rec.first_update
        if tau != rec.tau or fu != rec.first_update:
            infections[site] = InfectionRecord(site, tau, fu)

    if lazy:
        d = domain.d
        origin = (0,) * d
        if initial is not None or sigma is not None:
            raise ValueError("lazy runs take vacancies, not initial/sigma")
        v0 = frozenset(tuple(v) for v in (vacancies or [origin]))
        for v in v0:
            if len(v) != d or any(c < 0 for c in v):
                raise ValueError(f"bad vacancy site {v}")
        values = {v: 0 for v in v0}
        extent = [0] * d

        def _track(x):
            for k in range(d):
                if x[k] > extent[k]:
                    extent[k] = x[k]

        def _is_legal(x):
            if x == origin:
                return True
            for k in range(d):
                if x[k] > 0:
                    y = x[:k] + (x[k] - 1,) + x[k + 1 :]
                    if values.get(y, 1) == 0:
                        return True
            return False

        # candidates whose legality can differ from the frozen background
        cands = set(v0)
        cands.add(origin)
        for v in v0:
            for k in range(d):
                cands.add(v[:k] + (v[k] + 1,) + v[k + 1 :])
        P, V = IndexedSet(), IndexedSet()
        for x in sorted(cands):
            _track(x)
            if _is_legal(x):
                (V if values.get(x, 1) == 0 else P).add(x)
        for v in sorted(v0):
            if window is None or v in window:
                infections[v] = InfectionRecord(v, 0.0, np.inf)

        def _upper(x):
            return [
                x[:k] + (x[k] + 1,) + x[k + 1 :] for k in range(d)
            ]

        def _value(x):
            return values.get(x, 1)

        def _setval(x, v):
            values[x] = v

        def _site_of(x):
            return x

        target_key = (
            tuple(stop_when_vacant) if stop_when_vacant is not None else None
        )
    else:
        region = domain.region() if isinstance(domain, Box) else domain
        d = region.dim
        static, lower, upper_tab = _finite_tables(region, sigma)
        if initial is None:
            initial = Configuration.all_ones(region)
        elif tuple(initial.region.sites) != tuple(region.sites):
            raise ValueError("initial configuration lives on a different region")
        vals = bytearray(
            (initial.bits >> i) & 1 for i in range(region.size)
        )
        extent = [0] * d
        for s in region.sites:
            for k in range(d):
                if s[k] > extent[k]:
                    extent[k] = s[k]

        def _is_legal(i):
            if static[i]:
                return True
            for j in lower[i]:
                if vals[j] == 0:
                    return True
            return False

        P, V = IndexedSet(), IndexedSet()
        for i in range(region.size):
            if _is_legal(i):
                (V if vals[i] == 0 else P).add(i)
        sites_tab = region.sites
        for i in range(region.size):
            if vals[i] == 0:
                s = sites_tab[i]
                if window is None or s in window:
                    infections[s] = InfectionRecord(s, 0.0, np.inf)

        def _upper(i):
            return upper_tab[i]

        def _value(i):
            return vals[i]

        def _setval(i, v):
            vals[i] = v

        def _site_of(i):
            return sites_tab[i]

        if stop_when_vacant is not None:
            tk = tuple(stop_when_vacant)
            if tk not in region:
                raise ValueError(f"stop site {tk} not in the region")
            target_key = region.rank(tk)
        else:
            target_key = None

        if HAVE_KERNEL and not record_events and not _force_pure:
            return _kernel_finite(
                region,
                q,
                seed,
                replica,
                static,
                lower,
                upper_tab,
                vals,
                initial,
                t_max,
                target_key,
                max_events,
                budget_is_goal,
                window,
                tuple(extent),
            )

    if lazy:
        target_initially_vacant = (
            target_key is not None and values.get(target_key, 1) == 0
        )
    else:
        target_initially_vacant = (
            target_key is not None and vals[target_key] == 0
        )
    draws = _Draws(rng_for(seed, replica))
    events = [] if record_events else None
    t = 0.0
    nev = 0
    stopped = "target" if target_initially_vacant else None
    while stopped is None:
        rp = q * len(P)
        rv = p * len(V)
        rt = rp + rv
        if rt == 0.0:  # nothing can ever move again
            if t_max is not None:
                t = t_max
                stopped = "t_max"
                break
            raise RuntimeError("dynamics frozen: no legal site remains")
        e, uc, um = draws.next()
        t_next = t + e / rt
        if t_max is not None and t_next > t_max:
            t = t_max
            stopped = "t_max"
            break
        t = t_next
        if uc * rt < rp:
            x = P.pick(um)
            newv = 0
            P.discard(x)
            V.add(x)
        else:
            x = V.pick(um)
            newv = 1
            V.discard(x)
            P.add(x)
        _setval(x, newv)
        nev += 1
        site = _site_of(x)
        _record(site, t, newv == 0)
        if record_events:
            events.append((t, site, newv))
        if newv == 0:
            for y in _upper(x):
                if y not in P and y not in V:
                    if lazy:
                        _track(y)
                    (V if _value(y) == 0 else P).add(y)
        else:
            for y in _upper(x):
                if not _is_legal(y):
                    (P if _value(y) == 1 else V).discard(y)
        if newv == 0 and target_key is not None and x == target_key:
            stopped = "target"
            break
        if max_events is not None and nev >= max_events:
            stopped = "events"
            break
    result = SimulationResult(
        dim=d,
        q=q,
        seed=seed,
        replica=replica,
        mode="lazy" if lazy else "finite",
        t_end=t,
        n_events=nev,
        stopped=stopped,
        events=events,
        infections=infections,
        initial_vacancies=(
            v0 if lazy else frozenset(initial.vacancies())
        ),
        tracked_extent=tuple(extent),
        domain_lengths=(
            None
            if lazy
            else tuple(
                max(s[k] for s in region.sites) for k in range(d)
            )
        ),
    )
    if stopped == "events" and not budget_is_goal:
        raise BudgetExceededError(
            f"event budget {max_events} exhausted at t = {t}",
            partial=result,
        )
    return result


def _kernel_finite(
    region,
    q,
    seed,
    replica,
    static,
    lower,
    upper_tab,
    vals,
    initial,
    t_max,
    target_key,
    max_events,
    budget_is_goal,
    window,
    extent,
) -> SimulationResult:
    """Compiled finite run; output matches the pure loop bitwise."""
    engine = ReplicaEngine(
        region,
        q,
        static,
        lower,
        upper_tab,
        np.frombuffer(bytes(vals), dtype=np.uint8),
        t_max,
        target_key,
        max_events,
    )
    if target_key is not None and vals[target_key] == 0:
        status, t, nev = STATUS_TARGET, 0.0, 0
        engine.tau[:] = np.inf
        engine.first_up[:] = np.inf
        engine.tau[engine.init_values == 0] = 0.0
    else:
        status, t, nev = engine.run(rng_for(seed, replica))
    if status == STATUS_FROZEN:
        raise RuntimeError("dynamics frozen: no legal site remains")
    stopped = {
        STATUS_TMAX: "t_max",
        STATUS_TARGET: "target",
        STATUS_EVENTS: "events",
    }[status]
    infections = {}
    sites = region.sites
    for i in range(region.size):
        tau_i = engine.tau[i]
        fu_i = engine.first_up[i]
        if tau_i == np.inf and fu_i == np.inf:
            continue
        s = sites[i]
        if window is not None and s not in window:
            continue
        infections[s] = InfectionRecord(s, float(tau_i), float(fu_i))
    result = SimulationResult(
        dim=region.dim,
        q=q,
        seed=seed,
        replica=replica,
        mode="finite",
        t_end=t,
        n_events=nev,
        stopped=stopped,
        events=None,
        infections=infections,
        initial_vacancies=frozenset(initial.vacancies()),
        tracked_extent=extent,
        domain_lengths=tuple(
            max(s[k] for s in sites) for k in range(region.dim)
        ),
    )
    if stopped == "events" and not budget_is_goal:
        raise BudgetExceededError(
            f"event budget {max_events} exhausted at t = {t}",
            partial=result,
        )
    return result


def infected_set(result: SimulationResult, t: float) -> frozenset:
    """Sites whose first vacancy happened by time t."""
    return frozenset(
        s for s, rec in result.infections.items() if rec.tau <= t
    )


@dataclass(frozen=True)
class HittingEstimate:
    target: Site
    q: float
    replicas: int
    mean: float
    stderr: float
    times: np.ndarray


def mean_hitting(
    target: Site,
    q: float,
    replicas: int,
    seed: int,
    max_events_per_replica: int = 50_000_000,
) -> HittingEstimate:
    """Mean first-vacancy time of a quadrant site from the all-ones start.

    The constraint is oriented, so nothing outside the componentwise-lower
    box of the target can influence the target's history; the simulation
    runs on that box alone, which reproduces the quadrant law exactly.
    """
    target = tuple(target)
    if any(c < 0 for c in target):
        raise ValueError("target must lie in the quadrant")
    if replicas < 1:
        raise ValueError("need at least one replica")
    box = Box((0,) * len(target), target)
    times = np.empty(replicas)
    if HAVE_KERNEL:
        region = box.region()
        static, lower, upper_tab = _finite_tables(region, None)
        engine = ReplicaEngine(
            region,
            q,
            static,
            lower,
            upper_tab,
            np.ones(region.size, dtype=np.uint8),
            None,
            region.rank(target),
            max_events_per_replica,
        )
        for r in range(replicas):
            status, t, _ = engine.run(rng_for(seed, r))
            if status != STATUS_TARGET:
                err = BudgetExceededError(
                    f"event budget {max_events_per_replica} exhausted in "
                    f"replica {r} at t = {t}"
                )
                err.completed = r
                err.times = times[:r].copy()
                raise err
            times[r] = t
    else:  # pragma: no cover - compiled path always present in CI
        for r in range(replicas):
            try:
                res = run_trajectory(
                    box,
                    q,
                    seed=seed,
                    replica=r,
                    stop_when_vacant=target,
                    max_events=max_events_per_replica,
                )
            except BudgetExceededError as err:
                err.completed = r
                err.times = times[:r].copy()
                raise
            times[r] = res.t_end
    mean = float(times.mean())
    stderr = float(times.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else np.inf
    return HittingEstimate(target, q, replicas, mean, stderr, times)


@dataclass(frozen=True)
class VelocityFit:
    velocity: float
    intercept: float
    r_squared: float
    q: float
    theta: float
    normalized_exponent: float  # -2 log2(velocity) / theta^2


def velocity_fit(points, q: float) -> VelocityFit:
    """Least-squares front speed from (distance, mean hitting time) rows.

    Fits t = intercept + distance / velocity. Rows may carry a third
    entry, the standard error of the mean, in which case the fit weights
    each point by 1/stderr; without them it is plain least squares.
    Needs at least three points with strictly increasing distances; a
    non-positive slope is an error since the front must advance.
    """
    pts = sorted(tuple(float(v) for v in row) for row in points)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    if any(len(row) not in (2, 3) for row in pts):
        raise ValueError("rows must be (n, tau) or (n, tau, stderr)")
    ns = np.array([row[0] for row in pts])
    taus = np.array([row[1] for row in pts])
    if not np.all(np.diff(ns) > 0):
        raise ValueError("distances must be strictly increasing")
    errs = np.array([row[2] if len(row) == 3 else np.nan for row in pts])
    if np.all(np.isfinite(errs)) and np.all(errs > 0):
        w = 1.0 / errs
    else:
        w = np.ones_like(ns)
    slope, intercept = np.polyfit(ns, taus, 1, w=w)
    if slope <= 0:
        raise ValueError(f"fitted slope {slope} is not positive")
    pred = intercept + slope * ns
    wmean = float((w**2 * taus).sum() / (w**2).sum())
    ss_res = float((w**2 * (taus - pred) ** 2).sum())
    ss_tot = float((w**2 * (taus - wmean) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    v = 1.0 / float(slope)
    theta = neg_log2(q)
    return VelocityFit(
        velocity=v,
        intercept=float(intercept),
        r_squared=r2,
        q=q,
        theta=theta,
        normalized_exponent=-2.0 * np.log2(v) / theta**2,
    )


def time_average_occupation(
    result: SimulationResult, site: Site, t_burn: float = 0.0
) -> float:
    """Fraction of [t_burn, t_end] the site spends occupied.

    Needs a run recorded with record_events=True.
    """
    if result.events is None:
        raise ValueError("run was not recorded with record_events=True")
    site = tuple(site)
    if t_burn >= result.t_end:
        raise ValueError("burn-in swallows the whole run")
    value = 0 if site in result.initial_vacancies else 1
    occupied = 0.0
    prev = t_burn
    for t, s, v in result.events:
        if s != site:
            continue
        if t > t_burn:
            if value == 1:
                occupied += min(t, result.t_end) - prev
            prev = t
        value = v
    if value == 1:
        occupied += result.t_end - prev
    return occupied / (result.t_end - t_burn)


# -- persistence ------------------------------------------------------------


def save_trajectory(result: SimulationResult, path) -> None:
    """JSON header line, then one packed record (t, site, value) per event."""
    if result.events is None:
        raise ValueError("nothing to save: run with record_events=True")
    d = result.dim
    head = json.dumps(
        {
            "d": d,
            "q": result.q,
            "seed": result.seed,
            "replica": result.replica,
            "mode": result.mode,
            "t_end": result.t_end,
            "n_events": result.n_events,
            "stopped": result.stopped,
            "initial_vacancies": sorted(
                list(v) for v in result.initial_vacancies
            ),
            "domain_lengths": (
                list(result.domain_lengths)
                if result.domain_lengths is not None
                else None
            ),
        },
        sort_keys=True,
    )
    dtype = np.dtype([("t", "<f8"), ("site", "<i4", (d,)), ("value", "u1")])
    arr = np.empty(len(result.events), dtype=dtype)
    for i, (t, s, v) in enumerate(result.events):
        arr[i] = (t, s, v)
    with open(path, "wb") as fh:
        fh.write(head.encode() + b"\n")
        fh.write(arr.tobytes())


def load_trajectory(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        head = json.loads(fh.readline().decode())
        d = head["d"]
        dtype = np.dtype(
            [("t", "<f8"), ("site", "<i4", (d,)), ("value", "u1")]
        )
        body = fh.read()
    arr = np.frombuffer(body, dtype=dtype)
    if len(arr) != head["n_events"]:
        raise ValueError(
            f"event count mismatch: header {head['n_events']}, body {len(arr)}"
        )
    return head, arr


def infections_to_csv(result: SimulationResult, path) -> None:
    """One row per recorded site: coordinates, tau, first update time."""
    d = result.dim
    cols = [f"x{k + 1}" for k in range(d)] + ["tau", "first_update"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for rec in result.infection_records():
            row = [str(c) for c in rec.site]
            row.append(repr(float(rec.tau)))
            row.append(repr(float(rec.first_update)))
            fh.write(",".join(row) + "\n")
