"""Configurations, boundary conditions and the facilitation constraint.

A configuration assigns a bit to every site of a region: 1 for a particle,
0 for a vacancy. Bits are packed into a single integer using the region's
lexicographic site enumeration, bit i belonging to the site of rank i, so the
all-ones configuration of an N-site region is ``2**N - 1``.

A site x may be updated when the constraint holds: x is the lattice origin,
or some lower neighbour x - e is vacant, reading vacancies from the region
itself or from the boundary condition on the oriented boundary. The
constraint never looks at the value at x, which is what makes every legal
update reversible by the opposite legal update.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import IllegalUpdateError, SizeCapError
from .lattice import Box, Region, Site, lower_neighbors

ENUMERATION_CAP_SITES = 24

__all__ = [
    "Configuration",
    "BoundaryCondition",
    "ProductMeasure",
    "constraint",
    "apply_update",
    "sample_config",
    "serialize_config",
    "parse_config",
    "ENUMERATION_CAP_SITES",
]


@dataclass(frozen=True)
class Configuration:
    """Immutable assignment of bits to the sites of a region."""

    region: Region
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.region.size):
            raise ValueError("bit pattern out of range for the region")

    @staticmethod
    def all_ones(region: Region) -> "Configuration":
        return Configuration(region, (1 << region.size) - 1)

    @staticmethod
    def all_zeros(region: Region) -> "Configuration":
        return Configuration(region, 0)

    @staticmethod
    def from_values(region: Region, values: Mapping[Site, int]) -> "Configuration":
        bits = 0
        for s, v in values.items():
            if v not in (0, 1):
                raise ValueError(f"value at {s} must be 0 or 1")
            if v:
                bits |= 1 << region.rank(s)
        if len(values) != region.size:
            raise ValueError("values must cover every site of the region")
        return Configuration(region, bits)

    def value_at(self, x: Site) -> int:
        return (self.bits >> self.region.rank(x)) & 1

    def is_vacant(self, x: Site) -> bool:
        return not self.value_at(x)

    def with_value(self, x: Site, v: int) -> "Configuration":
        i = self.region.rank(x)
        bits = (self.bits & ~(1 << i)) | ((v & 1) << i)
        return Configuration(self.region, bits)

    def flipped(self, x: Site) -> "Configuration":
        return Configuration(self.region, self.bits ^ (1 << self.region.rank(x)))

    @property
    def particle_count(self) -> int:
        return self.bits.bit_count()

    @property
    def vacancy_count(self) -> int:
        return self.region.size - self.bits.bit_count()

    def vacancies(self) -> frozenset[Site]:
        return frozenset(
            s for i, s in enumerate(self.region.sites) if not (self.bits >> i) & 1
        )

    def to_array(self) -> np.ndarray:
        return np.array(
            [(self.bits >> i) & 1 for i in range(self.region.size)], dtype=np.uint8
        )


@dataclass(frozen=True)
class BoundaryCondition:
    """Fixed bits on the oriented boundary of a region.

    The domain must be exactly the oriented boundary; anything else is a
    construction error. ``maximal`` puts a vacancy everywhere on the boundary,
    the most permissive condition.
    """

    region: Region
    values: tuple[tuple[Site, int], ...]
    _map: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def from_map(region: Region, values: Mapping[Site, int]) -> "BoundaryCondition":
        bd = region.oriented_boundary()
        if set(values) != set(bd):
            missing = set(bd) - set(values)
            extra = set(values) - set(bd)
            raise ValueError(
                f"boundary values must cover the oriented boundary exactly; "
                f"missing {sorted(missing)}, extraneous {sorted(extra)}"
            )
        for s, v in values.items():
            if v not in (0, 1):
                raise ValueError(f"boundary value at {s} must be 0 or 1")
        pairs = tuple(sorted(values.items()))
        bc = BoundaryCondition(region, pairs)
        return bc

    @staticmethod
    def maximal(region: Region) -> "BoundaryCondition":
        return BoundaryCondition.from_map(
            region, {s: 0 for s in region.oriented_boundary()}
        )

    @staticmethod
    def all_ones(region: Region) -> "BoundaryCondition":
        return BoundaryCondition.from_map(
            region, {s: 1 for s in region.oriented_boundary()}
        )

    def __post_init__(self):
        if not self._map:
            self._map.update(dict(self.values))

    def value_at(self, x: Site) -> int:
        return self._map[x]

    def __contains__(self, x: Site) -> bool:
        return x in self._map

    def vacancy_sites(self) -> frozenset[Site]:
        return frozenset(s for s, v in self.values if v == 0)


def constraint(
    omega: Configuration, x: Site, sigma: BoundaryCondition | None = None
) -> int:
    """1 when x may be updated under omega with boundary sigma, else 0.

    ``sigma=None`` means an all-ones boundary (no outside help). The lattice
    origin, when it belongs to the region, is always updatable.
    """
    region = omega.region
    if x not in region:
        raise ValueError(f"site {x} is not in the region")
    if all(c == 0 for c in x):
        return 1
    for y in lower_neighbors(x):
        if y in region:
            if omega.is_vacant(y):
                return 1
        elif sigma is not None and y in sigma:
            if sigma.value_at(y) == 0:
                return 1
        # y inside the quadrant but outside region and boundary cannot occur:
        # y + e = x is in the region, so y is on the oriented boundary.
    return 0


def apply_update(
    omega: Configuration,
    x: Site,
    value: int,
    sigma: BoundaryCondition | None = None,
) -> Configuration:
    """Set site x to the given bit, if the constraint allows it.

    Raises :class:`IllegalUpdateError` carrying x when the constraint fails.
    Writing the value the site already holds is a legal no-op.
    """
    if value not in (0, 1):
        raise ValueError("value must be 0 or 1")
    if not constraint(omega, x, sigma):
        raise IllegalUpdateError(x, "no vacant lower neighbour and not the origin")
    return omega.with_value(x, value)


class ProductMeasure:
    """Product Bernoulli measure: each site holds a particle with probability p = 1 - q."""

    def __init__(self, q: float):
        if not 0.0 < q < 1.0:
            raise ValueError(f"vacancy density must lie in (0, 1), got {q}")
        self.q = float(q)
        self.p = 1.0 - float(q)

    def __repr__(self):
        return f"ProductMeasure(q={self.q})"

    def prob(self, omega: Configuration) -> float:
        n1 = omega.particle_count
        n0 = omega.region.size - n1
        return self.p**n1 * self.q**n0

    def log2_prob(self, omega: Configuration) -> float:
        n1 = omega.particle_count
        n0 = omega.region.size - n1
        return n1 * math.log2(self.p) + n0 * math.log2(self.q)

    def event_probability(
        self, region: Region, predicate: Callable[[Configuration], bool]
    ) -> float:
        """Exact measure of an event by enumeration. Refused above the size cap."""
        n = region.size
        if n > ENUMERATION_CAP_SITES:
            raise SizeCapError(
                f"exact enumeration capped at {ENUMERATION_CAP_SITES} sites, got {n}"
            )
        total = 0.0
        for s in range(1 << n):
            if predicate(Configuration(region, s)):
                n1 = s.bit_count()
                total += self.p**n1 * self.q ** (n - n1)
        return total


def sample_config(
    region: Region, measure: ProductMeasure, rng: np.random.Generator
) -> Configuration:
    """Draw a configuration from the product measure."""
    draws = rng.random(region.size) < measure.p
    bits = 0
    for i, hit in enumerate(draws):
        if hit:
            bits |= 1 << i
    return Configuration(region, bits)


# ---------------------------------------------------------------------------
# serialization: JSON descriptor line + flat bitstring, box regions only

def _box_of(region: Region) -> Box:
    lo = tuple(min(s[i] for s in region.sites) for i in range(region.dim))
    hi = tuple(max(s[i] for s in region.sites) for i in range(region.dim))
    lengths = tuple(h - l for l, h in zip(lo, hi))
    box = Box(lo, lengths)
    if box.size != region.size:
        raise ValueError("only box-shaped regions have a serial form")
    return box

def serialize_config(omega: Configuration) -> bytes:
    """Descriptor line (dimension, origin, lengths) then the flat bitstring.

    Bits appear in lexicographic site order, one ASCII character each, no
    compression. Only box-shaped regions are supported.
    """
    box = _box_of(omega.region)
    head = json.dumps(
        {"d": box.dim, "origin": list(box.origin), "lengths": list(box.lengths)},
        sort_keys=True,
    )
    bits = "".join(
        "1" if (omega.bits >> i) & 1 else "0" for i in range(omega.region.size)
    )
    return (head + "\n" + bits + "\n").encode()


def parse_config(data: bytes) -> Configuration:
    head, bits, *_ = data.decode().split("\n")
    desc = json.loads(head)
    box = Box(tuple(desc["origin"]), tuple(desc["lengths"]))
    if len(bits) != box.size:
        raise ValueError(
            f"bitstring length {len(bits)} does not match box size {box.size}"
        )
    packed = 0
    for i, ch in enumerate(bits):
        if ch == "1":
            packed |= 1 << i
        elif ch != "0":
            raise ValueError(f"invalid character {ch!r} in bitstring")
    return Configuration(box.region(), packed)
