"""A sparse set of sites with knight-move adjacency relaxes like a chain.

Blocks placed on knight-connected sites inside an ambient box inherit
the gap of the short chain their connectivity graph collapses to. The
two numbers below come from different state spaces and match exactly.
"""

from eastlab.lattice import Box, Region
from eastlab.spectral import (
    BlockSpec,
    knight_block_sites,
    spectral_gap,
    star_knight_gap,
)

q = 0.3
vertices = [(0, 0), (2, 1)]
ambient = Box((0, 0), (2, 2))

spec = BlockSpec.single_bits(vertices, q, adjacency="knight")
assembled = star_knight_gap(spec, ambient)
image = Region.from_sites([(0, 0), (1, 0)])
direct = spectral_gap(image, q)

print(f"knight vertices {vertices} in a 3x3 ambient box, q = {q}")
print(f"block sites: {sorted(knight_block_sites(vertices, ambient))}")
print(f"assembled gap: {assembled.gap:.15f}")
print(f"two-site chain: {direct.gap:.15f}")
print(f"difference:    {abs(assembled.gap - direct.gap):.1e}")
