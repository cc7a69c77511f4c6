"""Worst-case total-variation distance to equilibrium on finite boxes.

The quantity of interest is d(t) = max over starting configurations of the
total-variation distance between the time-t law and the stationary product
measure, on the box {0..n}^d. Three modes:

exact        one symmetric eigendecomposition gives the full transition
             matrix at every grid time, so the maximum over starts is taken
             over all of them; capped at 16 sites.
all_ones     only the fully occupied start, evaluated by uniformization; a
             lower bound on d(t), since that start is not proven to be the
             worst one at finite q.
monte_carlo  empirical law at each grid time from finished replicas; the
             plug-in TV statistic is biased upward by sampling noise of
             order sqrt(#states / replicas), so treat values near zero as
             noise floors, not as mixing claims.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import Configuration
from .dynamics import _finite_tables, rng_for, run_trajectory
from .errors import SizeCapError
from .lattice import Box
from .spectral import build_generator, transient_distribution

CUTOFF_EXACT_SITE_CAP = 16


@dataclass(frozen=True)
class CutoffCurve:
    """A sampled distance-to-equilibrium curve with its provenance."""

    ts: np.ndarray
    values: np.ndarray
    mode: str
    d: int
    n: int
    q: float
    replicas: Optional[int] = None
    seed: Optional[int] = None

    def crossing_time(self, level: float) -> float:
        """First grid-interpolated time where the curve falls below level."""
        v = self.values
        if v[0] <= level:
            return float(self.ts[0])
        below = np.nonzero(v <= level)[0]
        if len(below) == 0:
            raise ValueError(f"curve never falls below {level} on the grid")
        j = below[0]
        t0, t1 = self.ts[j - 1], self.ts[j]
        v0, v1 = v[j - 1], v[j]
        if v0 == v1:
            return float(t1)
        return float(t0 + (v0 - level) * (t1 - t0) / (v0 - v1))


def _tv_rows(rows: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(rows - mu[None, :]).sum(axis=1)


def _exact_curve(gen, ts: np.ndarray) -> np.ndarray:
    """Max-over-starts TV at each time via the symmetrized spectrum."""
    h = np.asarray(gen.symmetrized().todense())
    w, u = np.linalg.eigh(h)
    root = np.sqrt(gen.mu)
    inv_root = 1.0 / root
    out = np.empty(len(ts))
    for j, t in enumerate(ts):
        decay = (u * np.exp(-t * w)) @ u.T
        rows = inv_root[:, None] * decay * root[None, :]
        out[j] = float(_tv_rows(rows, gen.mu).max())
    return out


def cutoff_curve(
    n: int,
    d: int,
    q: float,
    ts,
    mode: str = "exact",
    replicas: int = 1000,
    seed: int = 0,
) -> CutoffCurve:
    """Distance-to-equilibrium curve on the box {0..n}^d over the time grid."""
    if n < 1:
        raise ValueError("box parameter must be at least 1")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if len(ts) == 0 or (np.diff(ts) <= 0).any() or ts[0] < 0:
        raise ValueError("need a strictly increasing nonnegative time grid")
    box = Box.cube(d, n)
    region = box.region()
    if mode == "exact":
        if region.size > CUTOFF_EXACT_SITE_CAP:
            raise SizeCapError(
                f"{region.size} sites exceed the {CUTOFF_EXACT_SITE_CAP}-site "
                "cap for the all-starts mode"
            )
        gen = build_generator(region, q)
        vals = _exact_curve(gen, ts)
        return CutoffCurve(ts, vals, mode, d, n, q)
    if mode == "all_ones":
        gen = build_generator(region, q)
        rows = transient_distribution(gen, Configuration.all_ones(region), ts)
        return CutoffCurve(ts, _tv_rows(rows, gen.mu), mode, d, n, q)
    if mode == "monte_carlo":
        vals = _mc_curve(box, q, ts, replicas, seed)
        return CutoffCurve(ts, vals, mode, d, n, q, replicas, seed)
    raise ValueError(f"unknown mode {mode!r}")


def _mc_curve(box, q, ts, replicas, seed):
    """Plug-in TV from endpoint states of independent all-ones runs."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    from ._kernel import HAVE_KERNEL, ReplicaEngine

    region = box.region()
    nst = 1 << region.size
    if nst > 1 << 20:
        raise SizeCapError("state space too large for empirical histograms")
    gen = build_generator(region, q)
    out = np.empty(len(ts))
    counts = np.zeros(nst, dtype=np.int64)
    for j, t in enumerate(ts):
        counts[:] = 0
        if HAVE_KERNEL:
            static, lower, upper = _finite_tables(region, None)
            init = np.ones(region.size, dtype=np.uint8)
            eng = ReplicaEngine(
                region, q, static, lower, upper, init, float(t), None, None
            )
            for r in range(replicas):
                eng.run(rng_for(seed, j * replicas + r))
                state = 0
                for i in range(region.size):
                    state |= int(eng.values[i]) << i
                counts[state] += 1
        else:
            for r in range(replicas):
                run = run_trajectory(
                    box,
                    q,
                    seed=seed,
                    replica=j * replicas + r,
                    t_max=float(t),
                    record_events=True,
                )
                state = (1 << region.size) - 1
                for _, site, v in run.events:
                    i = region.rank(site)
                    state = (state & ~(1 << i)) | (v << i)
                counts[state] += 1
        emp = counts / replicas
        out[j] = 0.5 * float(np.abs(emp - gen.mu).sum())
    return out
