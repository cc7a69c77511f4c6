"""Exact finite-state analysis: generators, gaps, and transient laws."""

from .blocks import BlockSpec, knight_block_sites, star_gap, star_knight_gap
from .generator import (
    BestSubset,
    GeneratorMatrix,
    SpectrumResult,
    TwoBlockResult,
    best_subset_gap,
    build_generator,
    constraint_tables,
    dirichlet_eigenvalue,
    export_generator,
    ladder_gap_reference,
    spectral_gap,
    stationary_vector,
    two_block_check,
)
from .transient import (
    hitting_tail,
    transient_distribution,
    tv_to_stationary,
    vacancy_event_mask,
)

__all__ = [
    "BestSubset",
    "BlockSpec",
    "GeneratorMatrix",
    "SpectrumResult",
    "TwoBlockResult",
    "best_subset_gap",
    "build_generator",
    "constraint_tables",
    "dirichlet_eigenvalue",
    "export_generator",
    "hitting_tail",
    "knight_block_sites",
    "ladder_gap_reference",
    "spectral_gap",
    "star_gap",
    "star_knight_gap",
    "stationary_vector",
    "transient_distribution",
    "tv_to_stationary",
    "two_block_check",
    "vacancy_event_mask",
]
