"""Exact generator assembly and symmetric eigenanalysis for finite regions.

States are packed integers over the region's lexicographic site enumeration
(bit i = site of rank i, 1 = particle). The generator acts on functions,
L f(s) = sum over updatable sites of rate(s, x) (f(s^x) - f(s)), with flip
rates q for 1 -> 0 and p for 0 -> 1. Detailed balance with respect to the
product Bernoulli(p) measure holds entry by entry by construction.

Eigenvalue work happens on the symmetrized matrix H = -D^{1/2} L D^{-1/2}
with D = diag(mu). Off-diagonal entries of H equal -sqrt(L_ij L_ji), which
avoids forming mu ratios and is exactly symmetric in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from ..config import BoundaryCondition
from ..errors import SizeCapError
from ..lattice import Box, Region, Site, lower_neighbors, neg_log2

SPARSE_CAP_STATES = 1 << 24
DENSE_CAP_STATES = 1 << 13
SUBSET_CAP_SITES = 12

__all__ = [
    "GeneratorMatrix",
    "SpectrumResult",
    "build_generator",
    "spectral_gap",
    "dirichlet_eigenvalue",
    "best_subset_gap",
    "two_block_check",
    "TwoBlockResult",
    "ladder_gap_reference",
    "stationary_vector",
    "export_generator",
]


def _as_region(domain: Region | Box) -> Region:
    return domain.region() if isinstance(domain, Box) else domain


def stationary_vector(n_sites: int, q: float) -> np.ndarray:
    """Product-measure weights over all 2^n packed states."""
    states = np.arange(1 << n_sites, dtype=np.uint64)
    ones = np.bitwise_count(states).astype(np.int64)
    p = 1.0 - q
    return p**ones * q ** (n_sites - ones)


def constraint_tables(
    region: Region, sigma: BoundaryCondition | None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-site legality data: a static flag and a lower-neighbour bit mask.

    Site i is updatable in state s iff static[i] or (s & mask[i]) != mask[i],
    i.e. some in-region lower neighbour is vacant. static[i] covers the
    lattice origin and any boundary vacancy just below site i.
    """
    n = region.size
    static = np.zeros(n, dtype=bool)
    masks = np.zeros(n, dtype=np.int64)
    for i, x in enumerate(region.sites):
        if all(c == 0 for c in x):
            static[i] = True
            continue
        for y in lower_neighbors(x):
            if y in region:
                masks[i] |= np.int64(1) << np.int64(region.rank(y))
            elif sigma is not None and y in sigma and sigma.value_at(y) == 0:
                static[i] = True
    return static, masks


@dataclass(frozen=True)
class GeneratorMatrix:
    """Sparse rate matrix with its stationary weights and site enumeration."""

    matrix: sp.csr_matrix
    mu: np.ndarray
    region: Region
    q: float
    sigma: BoundaryCondition | None

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def row_sum_error(self) -> float:
        return float(np.abs(self.matrix.sum(axis=1)).max())

    def detailed_balance_residual(self) -> float:
        flow = self.matrix.multiply(self.mu[:, None]).tocsr()
        diff = flow - flow.T
        return 0.0 if diff.nnz == 0 else float(np.abs(diff.data).max())

    def symmetrized(self) -> sp.csr_matrix:
        """H = -D^{1/2} L D^{-1/2}, exactly symmetric, positive semidefinite."""
        L = self.matrix
        off = L - sp.diags(L.diagonal())
        H = off.multiply(off.T).tocsr()
        H.data = -np.sqrt(H.data)
        return (H + sp.diags(-L.diagonal())).tocsr()


def build_generator(
    domain: Region | Box, q: float, sigma: BoundaryCondition | None = None
) -> GeneratorMatrix:
    """Assemble the exact flip-rate generator for a region.

    ``sigma=None`` is the all-ones boundary. Capped at 2^24 states.
    """
    region = _as_region(domain)
    if not 0.0 < q < 1.0:
        raise ValueError(f"vacancy density must lie in (0, 1), got {q}")
    n = region.size
    if (1 << n) > SPARSE_CAP_STATES:
        raise SizeCapError(f"state space 2^{n} exceeds the 2^24 sparse cap")
    nstates = 1 << n
    p = 1.0 - q
    static, masks = constraint_tables(region, sigma)

    states = np.arange(nstates, dtype=np.int64)
    rows, cols, vals = [], [], []
    diag = np.zeros(nstates)
    for i in range(n):
        legal = (
            np.ones(nstates, dtype=bool)
            if static[i]
            else (states & masks[i]) != masks[i]
        )
        if not legal.any():
            continue
        src = states[legal]
        bit = (src >> i) & 1
        rate = np.where(bit == 1, q, p)
        rows.append(src)
        cols.append(src ^ (1 << i))
        vals.append(rate)
        np.add.at(diag, src, -rate)
    rows.append(states)
    cols.append(states)
    vals.append(diag)
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nstates, nstates),
    ).tocsr()
    mu = stationary_vector(n, q)
    return GeneratorMatrix(L, mu, region, q, sigma)


@dataclass(frozen=True)
class SpectrumResult:
    """Spectral gap output with its ergodicity certificate.

    ``gap`` is the smallest positive eigenvalue of -L when the chain is
    ergodic, else 0.0 with ``ergodic=False`` and the states unreachable from
    all-ones listed (capped; ``unreachable_count`` is always exact).
    """

    gap: float
    ergodic: bool
    n_components: int
    unreachable_count: int
    unreachable_states: np.ndarray | None
    residual: float
    eigenvector: np.ndarray | None
    method: str

    def to_json_dict(self) -> dict:
        return {
            "gap": self.gap,
            "ergodic": self.ergodic,
            "n_components": self.n_components,
            "unreachable_count": self.unreachable_count,
            "residual": self.residual,
            "method": self.method,
        }


_CERTIFICATE_CAP = 1 << 16


def _components(L: sp.csr_matrix) -> tuple[int, np.ndarray]:
    off = L.copy().tolil()
    off.setdiag(0)
    ncomp, labels = csgraph.connected_components(off.tocsr(), directed=False)
    return ncomp, labels


def _gap_of_symmetric(
    H: sp.csr_matrix, mu: np.ndarray, want_vector: bool
) -> tuple[float, float, np.ndarray | None, str]:
    """Smallest positive eigenvalue of an ergodic symmetrized generator."""
    nstates = H.shape[0]
    if nstates <= DENSE_CAP_STATES:
        dense = H.toarray()
        w, V = np.linalg.eigh(dense)
        gap = float(w[1])
        vec = V[:, 1]
        res = float(np.linalg.norm(H @ vec - gap * vec))
        return gap, res, (vec if want_vector else None), "dense"
    # deflate the known kernel sqrt(mu) and take the smallest remaining pair
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal((nstates, 2))
    kernel = np.sqrt(mu)[:, None]
    vals, vecs = spla.lobpcg(
        H, x0, Y=kernel, largest=False, tol=1e-10, maxiter=2000
    )
    order = np.argsort(vals)
    gap = float(vals[order[0]])
    vec = vecs[:, order[0]]
    res = float(np.linalg.norm(H @ vec - gap * vec))
    return gap, res, (vec if want_vector else None), "lobpcg"


def spectral_gap(
    domain: Region | Box,
    q: float,
    sigma: BoundaryCondition | None = None,
    want_vector: bool = False,
    gen: GeneratorMatrix | None = None,
) -> SpectrumResult:
    """Spectral gap of the chain on a region under a boundary condition.

    Reducible chains are reported with gap 0 and the set of states the
    dynamics cannot reach from the all-ones configuration, rather than an
    error: vanishing gaps are meaningful answers here.
    """
    if gen is None:
        gen = build_generator(domain, q, sigma)
    ncomp, labels = _components(gen.matrix)
    if ncomp > 1:
        full = gen.n_states - 1  # all-ones state index
        unreachable = np.nonzero(labels != labels[full])[0]
        stored = unreachable if len(unreachable) <= _CERTIFICATE_CAP else None
        return SpectrumResult(
            0.0, False, ncomp, len(unreachable), stored, 0.0, None, "components"
        )
    gap, res, vec, method = _gap_of_symmetric(
        gen.symmetrized(), gen.mu, want_vector
    )
    return SpectrumResult(gap, True, 1, 0, None, res, vec, method)


def dirichlet_eigenvalue(
    domain: Region | Box,
    q: float,
    sigma: BoundaryCondition | None = None,
    target: Site | None = None,
) -> float:
    """Smallest eigenvalue of -L killed on the event "target site vacant".

    The operator is restricted to configurations where the target holds a
    particle. For a box the target defaults to the upper corner. The value
    controls the exponential tail of the corner infection time.
    """
    region = _as_region(domain)
    if target is None:
        target = (
            domain.corner if isinstance(domain, Box) else region.sites[-1]
        )
    if target not in region:
        raise ValueError(f"target {target} not in the region")
    gen = build_generator(region, q, sigma)
    H = gen.symmetrized()
    tbit = region.rank(target)
    keep = np.nonzero((np.arange(gen.n_states) >> tbit) & 1)[0]
    Hsub = H[np.ix_(keep, keep)]
    m = len(keep)
    if m <= DENSE_CAP_STATES:
        w = np.linalg.eigvalsh(
            Hsub.toarray() if sp.issparse(Hsub) else np.asarray(Hsub)
        )
        return float(w[0])
    Hsub = sp.csr_matrix(Hsub)
    vals = spla.eigsh(Hsub, k=1, which="SA", return_eigenvectors=False)
    return float(vals[0])


@dataclass(frozen=True)
class BestSubset:
    region: Region
    gap: float
    candidates: int


def best_subset_gap(box: Box, q: float) -> BestSubset:
    """Exhaustive max of the gap over subsets containing origin and corner.

    Subsets are visited by size then lexicographically, and only a strictly
    larger gap replaces the incumbent, so ties resolve to the smallest then
    lexicographically earliest subset. Cost grows as 3^{sites}, capped at 12
    sites.
    """
    if any(c != 0 for c in box.origin):
        raise ValueError("subset search expects a box anchored at the origin")
    region = box.region()
    if region.size > SUBSET_CAP_SITES:
        raise SizeCapError(
            f"subset search capped at {SUBSET_CAP_SITES} sites, got {region.size}"
        )
    corner = box.corner
    origin = (0,) * box.dim
    free = [s for s in region.sites if s not in (origin, corner)]
    best: tuple[Region, float] | None = None
    count = 0
    for size in range(len(free) + 1):
        for picks in _combinations_lex(free, size):
            V = Region.from_sites([origin, corner, *picks])
            res = spectral_gap(V, q)
            count += 1
            if best is None or res.gap > best[1]:
                best = (V, res.gap)
    assert best is not None
    return BestSubset(best[0], best[1], count)


def _combinations_lex(pool, r):
    import itertools

    return itertools.combinations(pool, r)


@dataclass(frozen=True)
class TwoBlockResult:
    lhs: float
    rhs: float
    gap_v1: float
    gap_v2_pinned: float
    passed: bool


def two_block_check(
    V1: Region, V2: Region, z: Site, q: float, slack: float = 1e-12
) -> TwoBlockResult:
    """Check gap(V1 union V2) >= (q/4) min(gap(V1), gap of V2 helped at z).

    V1 must contain the lattice origin, z must lie in V1 with some upper
    neighbour in V2, and the boundary condition on V2 places its single
    vacancy at z. All three gaps are exact dense eigenvalues.
    """
    d = V1.dim
    origin = (0,) * d
    if origin not in V1:
        raise ValueError("V1 must contain the lattice origin")
    if z not in V1 or z in V2:
        raise ValueError("z must lie in V1 and outside V2")
    from ..lattice import upper_neighbors

    if not any(y in V2 for y in upper_neighbors(z)):
        raise ValueError("z must sit directly below V2")
    union = Region.from_sites(list(V1.sites) + list(V2.sites))
    if union.size > SUBSET_CAP_SITES:
        raise SizeCapError("two-block check capped at 12 sites")
    bd2 = V2.oriented_boundary()
    sigma2 = BoundaryCondition.from_map(
        V2, {s: (0 if s == z else 1) for s in bd2}
    )
    res2 = spectral_gap(V2, q, sigma2)
    if not res2.ergodic:
        raise ValueError(
            "V2 is not ergodic under the single-vacancy boundary at z"
        )
    res1 = spectral_gap(V1, q)
    lhs = spectral_gap(union, q).gap
    rhs = (q / 4.0) * min(res1.gap, res2.gap)
    return TwoBlockResult(lhs, rhs, res1.gap, res2.gap, lhs >= rhs - slack)


def ladder_gap_reference(n: int, q: float) -> float:
    """Leading-order gap scale for boxes whose longest side is about 2^n.

    2^{-(n theta - n(n-1)/2)} while n <= theta = |log2 q|, frozen at the
    n = theta value 2^{-theta^2/2} beyond.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    theta = neg_log2(q)
    if n <= theta:
        expo = n * theta - n * (n - 1) / 2.0
    else:
        expo = theta * theta / 2.0
    return 2.0**-expo


def export_generator(gen: GeneratorMatrix, path) -> None:
    """Coordinate-list text dump with a JSON header line."""
    head = json.dumps(
        {
            "states": gen.n_states,
            "q": gen.q,
            "region": [list(s) for s in gen.region.sites],
        },
        sort_keys=True,
    )
    coo = gen.matrix.tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(head + "\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
