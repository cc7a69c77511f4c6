"""How many vacancies a legal path must carry, as the target recedes.

The minimax count steps up at powers of two along a chain. In two
dimensions the same distance is cheaper: paths can spread sideways, and
the corner of a square box costs no more than a much shorter chain.
"""

from eastlab.lattice import Box
from eastlab.pathspace import barrier, bottleneck_measure

print("chain {0..L}, target L")
print(f"{'L':>4} {'height':>7}")
for L in range(1, 9):
    region = Box((0,), (L,)).region()
    print(f"{L:>4} {barrier(region, (L,)):>7}")

print()
print("square box, target at the far corner")
print(f"{'corner':>8} {'height':>7} {'level set mass (q=0.1)':>24}")
for L in (1, 2, 3):
    region = Box.cube(2, L).region()
    k = barrier(region, (L, L))
    meas = bottleneck_measure(
        lambda w: w.vacancy_count >= k, region, 0.1, d=2, L=L
    )
    print(f"{(L, L)!s:>8} {k:>7} {meas.mu:>24.3e}")
