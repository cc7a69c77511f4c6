"""Oriented chains over general per-site outcome spaces.

Each site carries a finite outcome space with probability weights and a
designated facilitating subset of outcomes of total weight q_active. A site
resamples from its weights when it is the lattice origin or some lower
neighbour inside the system shows a facilitating outcome. With two-outcome
spaces and facilitating set {0} this is exactly the single-spin chain, and
the generator matches build_generator entry for entry over the packed-bit
enumeration.

The Knight variant moves on the index-sum-divisible sublattice with its own
basis, and a legal update resamples the vertex together with its enlargement
footprint in one block draw.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.sparse as sp

from ..errors import SizeCapError
from ..lattice import (
    Box,
    Site,
    enlargement,
    in_knight_lattice,
    knight_lower_neighbors,
    lower_neighbors,
)
from .generator import GeneratorMatrix, SpectrumResult, spectral_gap

STATE_CAP = 1 << 20

__all__ = ["BlockSpec", "star_gap", "star_knight_gap", "knight_block_sites"]


@dataclass(frozen=True)
class BlockSpec:
    """Site list with per-site outcome weights and facilitating outcomes.

    ``adjacency`` selects which lower-neighbour map drives the constraint:
    "lattice" for unit basis steps, "knight" for the sublattice basis.
    """

    sites: tuple[Site, ...]
    weights: tuple[tuple[float, ...], ...]
    facilitating: tuple[frozenset[int], ...]
    adjacency: str = "lattice"

    def __post_init__(self):
        if len(self.sites) != len(set(self.sites)):
            raise ValueError("duplicate sites")
        if not (len(self.sites) == len(self.weights) == len(self.facilitating)):
            raise ValueError("sites, weights, facilitating must align")
        if self.adjacency not in ("lattice", "knight"):
            raise ValueError(f"unknown adjacency {self.adjacency!r}")
        dims = {len(s) for s in self.sites}
        if len(dims) != 1:
            raise ValueError("sites must share one dimension")
        qs = []
        for s, w, g in zip(self.sites, self.weights, self.facilitating):
            if any(c < 0 for c in s):
                raise ValueError(f"negative coordinate at {s}")
            if self.adjacency == "knight" and not in_knight_lattice(s):
                raise ValueError(f"{s} is off the knight sublattice")
            if abs(sum(w) - 1.0) > 1e-12:
                raise ValueError(f"weights at {s} sum to {sum(w)}, not 1")
            if any(x <= 0 for x in w):
                raise ValueError(f"weights at {s} must be strictly positive")
            if not g or not g < frozenset(range(len(w))):
                raise ValueError(
                    f"facilitating set at {s} must be a nonempty proper subset"
                )
            qs.append(sum(w[i] for i in g))
        if max(qs) - min(qs) > 1e-12:
            raise ValueError(
                f"facilitating weight must match across sites, spread {qs}"
            )
        object.__setattr__(self, "_q_active", qs[0])

    @property
    def q_active(self) -> float:
        """Common probability of a facilitating outcome."""
        return self._q_active

    @property
    def dim(self) -> int:
        return len(self.sites[0])

    @staticmethod
    def single_bits(
        sites, q: float, adjacency: str = "lattice"
    ) -> "BlockSpec":
        """Two-outcome sites, outcome 0 with weight q facilitating."""
        sites = tuple(sorted(sites))
        return BlockSpec(
            sites,
            ((q, 1.0 - q),) * len(sites),
            (frozenset({0}),) * len(sites),
            adjacency,
        )

    @staticmethod
    def bit_blocks(
        sites, q: float, width: int, adjacency: str = "lattice"
    ) -> "BlockSpec":
        """Each site holds a width-bit word under product Bernoulli(1-q).

        Outcome k is the packed word; any word with a vacancy facilitates,
        so the facilitating weight is 1 - (1-q)^width.
        """
        if width < 1:
            raise ValueError("width must be positive")
        sites = tuple(sorted(sites))
        p = 1.0 - q
        w = tuple(
            p ** int(k).bit_count() * q ** (width - int(k).bit_count())
            for k in range(1 << width)
        )
        full = (1 << width) - 1
        fac = frozenset(k for k in range(1 << width) if k != full)
        return BlockSpec(
            sites, (w,) * len(sites), (fac,) * len(sites), adjacency
        )


class _ProductSpace:
    """Mixed-radix state indexing with site 0 least significant."""

    def __init__(self, sizes):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self.strides = np.concatenate(
            ([1], np.cumprod(self.sizes[:-1]))
        ).astype(np.int64)
        self.n_states = int(self.sizes.prod())
        if self.n_states > STATE_CAP:
            raise SizeCapError(
                f"{self.n_states} product states exceed the 2^20 cap"
            )

    def digit(self, states: np.ndarray, i: int) -> np.ndarray:
        return (states // self.strides[i]) % self.sizes[i]


def _neighbor_map(spec: BlockSpec):
    step = (
        lower_neighbors if spec.adjacency == "lattice" else knight_lower_neighbors
    )
    index = {s: i for i, s in enumerate(spec.sites)}
    origin = (0,) * spec.dim
    nbrs = []
    for s in spec.sites:
        if s == origin:
            nbrs.append(None)  # always updatable
        else:
            nbrs.append([index[y] for y in step(s) if y in index])
    return nbrs


def _legal_mask(
    spec: BlockSpec, space: _ProductSpace, states: np.ndarray, i: int, nbrs
) -> np.ndarray:
    if nbrs[i] is None:
        return np.ones(len(states), dtype=bool)
    legal = np.zeros(len(states), dtype=bool)
    for j in nbrs[i]:
        dj = space.digit(states, j)
        legal |= np.isin(dj, sorted(spec.facilitating[j]))
    return legal


def _block_generator(spec: BlockSpec) -> tuple[sp.csr_matrix, np.ndarray]:
    """Resampling generator and stationary product weights."""
    space = _ProductSpace([len(w) for w in spec.weights])
    states = np.arange(space.n_states, dtype=np.int64)
    nbrs = _neighbor_map(spec)
    rows, cols, vals = [], [], []
    diag = np.zeros(space.n_states)
    for i, w in enumerate(spec.weights):
        legal = _legal_mask(spec, space, states, i, nbrs)
        if not legal.any():
            continue
        src = states[legal]
        cur = space.digit(src, i)
        base = src - cur * space.strides[i]
        # off-diagonal entries for the other outcomes; the diagonal picks up
        # minus their sum, accumulated per site so the float expressions
        # match the single-spin assembly exactly
        for o in range(len(w)):
            keep = cur != o
            if not keep.any():
                continue
            rows.append(src[keep])
            cols.append(base[keep] + o * space.strides[i])
            vals.append(np.full(keep.sum(), w[o]))
        # leave-one-out sums, not total-minus-current: the latter can be an
        # ulp off and would break exact agreement with the single-spin build
        loo = np.array(
            [sum(w[o] for o in range(len(w)) if o != c) for c in range(len(w))]
        )
        np.add.at(diag, src, -loo[cur])
    rows.append(states)
    cols.append(states)
    vals.append(diag)
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_states, space.n_states),
    ).tocsr()
    mu = np.ones(space.n_states)
    for i, w in enumerate(spec.weights):
        mu *= np.asarray(w)[space.digit(states, i)]
    return L, mu


def star_gap(spec: BlockSpec) -> SpectrumResult:
    """Spectral gap of the general-outcome oriented chain.

    Reuses the symmetric eigenvalue pipeline; with single-bit sites the
    eigenvalue agrees bitwise with spectral_gap on the same region because
    the assembled matrices coincide.
    """
    L, mu = _block_generator(spec)
    region_like = _FakeRegion(spec.sites)
    gen = GeneratorMatrix(L, mu, region_like, spec.q_active, None)
    return spectral_gap(region_like, spec.q_active, gen=gen)


class _FakeRegion:
    """Minimal site-list stand-in so GeneratorMatrix can carry block chains."""

    def __init__(self, sites):
        self.sites = tuple(sites)
        self.dim = len(sites[0])
        self.size = len(sites)

    def region(self):
        return self


def knight_block_sites(vertices, ambient: Box) -> tuple[Site, ...]:
    """Union of each vertex with its enlargement, clipped to the ambient box."""
    out: set[Site] = set()
    for z in vertices:
        if z not in ambient:
            raise ValueError(f"vertex {z} outside the ambient box")
        out.add(z)
        out.update(enlargement(z, within=ambient))
    return tuple(sorted(out))


def star_knight_gap(
    spec: BlockSpec,
    ambient: Box,
    filler_weights: tuple[float, ...] | None = None,
) -> SpectrumResult:
    """Gap of the block chain driven by knight vertices.

    The state space lives on every vertex plus its clipped enlargement. A
    legal knight update redraws the whole vertex-plus-enlargement block from
    the product of single-site weights, so a vertex resample also scrambles
    sites shared with neighbouring blocks. Non-vertex sites default to
    two-outcome weights (q_active, 1 - q_active); their marginal does not
    move the eigenvalue, only the bookkeeping.
    """
    if spec.adjacency != "knight":
        raise ValueError("spec must use knight adjacency")
    if filler_weights is None:
        filler_weights = (spec.q_active, 1.0 - spec.q_active)
    sites = knight_block_sites(spec.sites, ambient)
    vidx = {z: k for k, z in enumerate(spec.sites)}
    weights = tuple(
        spec.weights[vidx[s]] if s in vidx else tuple(filler_weights)
        for s in sites
    )
    space = _ProductSpace([len(w) for w in weights])
    states = np.arange(space.n_states, dtype=np.int64)
    pos = {s: i for i, s in enumerate(sites)}
    origin = (0,) * spec.dim

    rows, cols, vals = [], [], []
    for z in spec.sites:
        k = vidx[z]
        if z == origin:
            legal = np.ones(space.n_states, dtype=bool)
        else:
            legal = np.zeros(space.n_states, dtype=bool)
            for y in knight_lower_neighbors(z):
                if y in vidx:
                    dj = space.digit(states, pos[y])
                    legal |= np.isin(
                        dj, sorted(spec.facilitating[vidx[y]])
                    )
        if not legal.any():
            continue
        src = states[legal]
        block = [pos[s] for s in ((z,) + tuple(enlargement(z, within=ambient)))]
        base = src.copy()
        for i in block:
            base -= space.digit(src, i) * space.strides[i]
        outcome_sets = [range(int(space.sizes[i])) for i in block]
        for combo in product(*outcome_sets):
            w = 1.0
            tgt = base.copy()
            for i, o in zip(block, combo):
                w *= weights[i][o]
                tgt += o * space.strides[i]
            rows.append(src)
            cols.append(tgt)
            vals.append(np.full(len(src), w))
        rows.append(src)
        cols.append(src)
        vals.append(-np.ones(len(src)))
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_states, space.n_states),
    ).tocsr()
    mu = np.ones(space.n_states)
    for i, w in enumerate(weights):
        mu *= np.asarray(w)[space.digit(states, i)]
    fake = _FakeRegion(sites)
    gen = GeneratorMatrix(L, mu, fake, spec.q_active, None)
    return spectral_gap(fake, spec.q_active, gen=gen)
