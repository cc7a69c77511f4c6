"""Relaxation rates of small boxes, computed exactly.

The gap barely moves as the box grows along one axis, and adding a second
row costs far less than doubling the chain length.
"""

from eastlab.lattice import Box
from eastlab.spectral import spectral_gap

q = 0.3

print(f"q = {q}")
print(f"{'box':>10} {'sites':>6} {'gap':>12} {'relaxation':>12}")
for lengths in [(1,), (3,), (7,), (1, 1), (3, 1), (3, 2)]:
    box = Box((0,) * len(lengths), lengths)
    res = spectral_gap(box.region(), q)
    label = "x".join(str(L + 1) for L in lengths)
    print(
        f"{label:>10} {box.region().size:>6} {res.gap:>12.6f} "
        f"{1.0 / res.gap:>12.2f}"
    )
