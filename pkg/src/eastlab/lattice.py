"""Geometry of finite site sets in the positive quadrant Z^d_+.

Sites are plain integer tuples. A :class:`Region` is an explicit finite set of
sites with a fixed lexicographic enumeration; every matrix layout and bit
packing elsewhere in the package refers to that enumeration. A :class:`Box` is
an axis-aligned product of integer intervals given by its origin and per-axis
side lengths, so lengths ``(L1, ..., Ld)`` give ``prod(L_i + 1)`` sites.

The directed structure of the dynamics enters through *lower* neighbours
``x - e`` (canonical basis ``e``) and through the oriented boundary of a
region: the sites outside the region, still inside the quadrant, that sit one
step below some member of the region.

The module also provides the index-(d+1) sublattice used by the block
constructions ("knight" moves): the sublattice spanned by the vectors with a 2
in one coordinate and a 1 in every other, the linear isomorphism between that
sublattice and Z^d, and the small simplex of off-sublattice sites attached to
each of its vertices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

Site = tuple[int, ...]

__all__ = [
    "Site",
    "Region",
    "Box",
    "basis",
    "leq",
    "l1_distance",
    "lower_neighbors",
    "upper_neighbors",
    "oriented_boundary",
    "neg_log2",
    "is_outstretched",
    "knight_basis",
    "knight_embed",
    "knight_project",
    "in_knight_lattice",
    "knight_lower_neighbors",
    "knight_upper_neighbors",
    "enlargement",
]


def basis(d: int) -> tuple[Site, ...]:
    """Canonical unit vectors of Z^d."""
    return tuple(tuple(1 if j == i else 0 for j in range(d)) for i in range(d))


def leq(x: Site, y: Site) -> bool:
    """Componentwise partial order: every coordinate of x at most that of y."""
    return all(a <= b for a, b in zip(x, y, strict=True))


def l1_distance(x: Site, y: Site) -> int:
    return sum(abs(a - b) for a, b in zip(x, y, strict=True))


def lower_neighbors(x: Site) -> Iterator[Site]:
    """Sites x - e that remain in the quadrant, in basis order."""
    for i, c in enumerate(x):
        if c > 0:
            yield x[:i] + (c - 1,) + x[i + 1 :]


def upper_neighbors(x: Site) -> Iterator[Site]:
    for i, c in enumerate(x):
        yield x[:i] + (c + 1,) + x[i + 1 :]


def _check_site(x: Site, d: int | None = None) -> None:
    if d is not None and len(x) != d:
        raise ValueError(f"site {x} has dimension {len(x)}, expected {d}")
    if any(not isinstance(c, int) for c in x):
        raise ValueError(f"site {x} has non-integer coordinates")
    if any(c < 0 for c in x):
        raise ValueError(f"site {x} lies outside the positive quadrant")


@dataclass(frozen=True)
class Region:
    """Finite subset of Z^d_+ with a fixed lexicographic site enumeration.

    ``sites`` is stored sorted; ``rank(x)`` gives the index of ``x`` in that
    order. Bit i of any packed configuration integer refers to the site of
    rank i.
    """

    sites: tuple[Site, ...]
    dim: int
    _rank: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def from_sites(sites: Iterable[Site]) -> "Region":
        uniq = sorted(set(tuple(s) for s in sites))
        if not uniq:
            raise ValueError("a region must contain at least one site")
        d = len(uniq[0])
        for s in uniq:
            _check_site(s, d)
        reg = Region(tuple(uniq), d)
        reg._rank.update({s: i for i, s in enumerate(uniq)})
        return reg

    def __post_init__(self):
        if not self._rank:
            self._rank.update({s: i for i, s in enumerate(self.sites)})

    @property
    def size(self) -> int:
        return len(self.sites)

    def __contains__(self, x: Site) -> bool:
        return x in self._rank

    def __iter__(self) -> Iterator[Site]:
        return iter(self.sites)

    def rank(self, x: Site) -> int:
        return self._rank[x]

    @property
    def has_origin(self) -> bool:
        return all(c == 0 for c in self.sites[0])

    def oriented_boundary(self) -> frozenset[Site]:
        return oriented_boundary(self.sites)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: origin plus nonnegative side lengths per axis."""

    origin: Site
    lengths: tuple[int, ...]

    def __post_init__(self):
        _check_site(self.origin)
        if len(self.lengths) != len(self.origin):
            raise ValueError("origin and lengths disagree on dimension")
        if any(not isinstance(L, int) or L < 0 for L in self.lengths):
            raise ValueError("side lengths must be nonnegative integers")

    @staticmethod
    def cube(d: int, L: int, origin: Site | None = None) -> "Box":
        return Box(origin if origin is not None else (0,) * d, (L,) * d)

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def corner(self) -> Site:
        """The componentwise maximal site."""
        return tuple(o + L for o, L in zip(self.origin, self.lengths))

    @property
    def size(self) -> int:
        return math.prod(L + 1 for L in self.lengths)

    def __contains__(self, x: Site) -> bool:
        return len(x) == self.dim and all(
            o <= c <= o + L for c, o, L in zip(x, self.origin, self.lengths)
        )

    def sites(self) -> Iterator[Site]:
        """All sites in lexicographic order."""
        ranges = [range(o, o + L + 1) for o, L in zip(self.origin, self.lengths)]
        return iter(itertools.product(*ranges))

    def region(self) -> Region:
        return Region.from_sites(self.sites())


def oriented_boundary(sites: Iterable[Site]) -> frozenset[Site]:
    """Sites of the quadrant outside the given set lying one step below it.

    y belongs to the boundary when y is not in the set but y + e is, for some
    canonical basis vector e. Points with a negative coordinate never qualify
    because they are outside the quadrant. A box whose origin is the lattice
    origin therefore has empty oriented boundary.
    """
    inner = set(sites)
    out = set()
    for x in inner:
        for y in lower_neighbors(x):
            if y not in inner:
                out.add(y)
    return frozenset(out)


def neg_log2(q: float) -> float:
    """|log2 q|, the scale parameter attached to a vacancy density q in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"vacancy density must lie in (0, 1), got {q}")
    return abs(math.log2(q))


def is_outstretched(
    lengths: Sequence[int], beta: float, kappa: float, q: float
) -> bool:
    """Aspect-ratio test for a box with the given side lengths.

    True when max over axis pairs of (L_i or 1) / (L_j or 1) is at most
    kappa * 2**(beta * |log2 q|). Zero lengths count as 1 so that degenerate
    boxes compare by their nontrivial extents.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    theta = neg_log2(q)
    eff = [max(L, 1) for L in lengths]
    ratio = max(eff) / min(eff)
    return ratio <= kappa * 2.0 ** (beta * theta)


# ---------------------------------------------------------------------------
# index-(d+1) sublattice ("knight" moves)

def knight_basis(d: int) -> tuple[Site, ...]:
    """Spanning vectors of the sublattice: 2 in one coordinate, 1 elsewhere."""
    if d < 2:
        raise ValueError("the knight sublattice needs dimension at least 2")
    return tuple(
        tuple(2 if j == i else 1 for j in range(d)) for i in range(d)
    )


def knight_embed(x: Sequence[int]) -> Site:
    """Image of x in Z^d under the map sending unit vectors to the knight basis.

    Equals x + (sum x) * (1, ..., 1); the image set is exactly the vertices
    whose coordinate sum is divisible by d + 1.
    """
    d = len(x)
    if d < 2:
        raise ValueError("the knight sublattice needs dimension at least 2")
    s = sum(x)
    return tuple(c + s for c in x)


def knight_project(z: Sequence[int]) -> Site:
    """Inverse of :func:`knight_embed`; rejects points off the sublattice."""
    d = len(z)
    if d < 2:
        raise ValueError("the knight sublattice needs dimension at least 2")
    s = sum(z)
    if s % (d + 1):
        raise ValueError(f"{tuple(z)} is not on the index-{d + 1} sublattice")
    k = s // (d + 1)
    return tuple(c - k for c in z)


def in_knight_lattice(z: Sequence[int]) -> bool:
    return sum(z) % (len(z) + 1) == 0


def knight_lower_neighbors(z: Site) -> Iterator[Site]:
    """In-quadrant sublattice neighbours one basis vector below z, basis order."""
    for v in knight_basis(len(z)):
        y = tuple(c - w for c, w in zip(z, v))
        if all(c >= 0 for c in y):
            yield y


def knight_upper_neighbors(z: Site) -> Iterator[Site]:
    for v in knight_basis(len(z)):
        yield tuple(c + w for c, w in zip(z, v))


def enlargement(z: Site, within=None) -> frozenset[Site]:
    """Off-sublattice sites attached to a sublattice vertex z.

    These are the y componentwise above z with 1 <= |y - z|_1 <= d. Any such y
    has coordinate-sum offset in 1..d, hence never lies on the sublattice
    itself. In d = 2 the set has five members. ``within`` optionally filters
    the result by membership, e.g. an ambient Box or Region.
    """
    d = len(z)
    out = []
    for delta in itertools.product(range(d + 1), repeat=d):
        if 1 <= sum(delta) <= d:
            y = tuple(c + dd for c, dd in zip(z, delta))
            if within is None or y in within:
                out.append(y)
    return frozenset(out)
