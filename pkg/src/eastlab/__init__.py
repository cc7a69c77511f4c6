"""eastlab: oriented kinetically constrained lattice dynamics on the quadrant.

Exact finite-state analysis (generators, spectral gaps, Dirichlet
eigenvalues, hitting tails), event-driven simulation of the infinite-quadrant
dynamics, path-space energy barriers and bottlenecks, and the closed-form
scaling predictions, all for the oriented single-vacancy-facilitated spin
dynamics with product Bernoulli equilibrium.
"""

from .errors import (
    BudgetExceededError,
    EastLabError,
    IllegalUpdateError,
    SizeCapError,
    UnreachableTargetError,
)
from .lattice import (
    Box,
    Region,
    Site,
    basis,
    enlargement,
    in_knight_lattice,
    is_outstretched,
    knight_basis,
    knight_embed,
    knight_lower_neighbors,
    knight_project,
    knight_upper_neighbors,
    l1_distance,
    leq,
    lower_neighbors,
    neg_log2,
    oriented_boundary,
    upper_neighbors,
)
from .config import (
    BoundaryCondition,
    Configuration,
    ProductMeasure,
    apply_update,
    constraint,
    parse_config,
    sample_config,
    serialize_config,
)

__version__ = "0.1.0"
