"""The limit predictions in one place.

Prints the fixed point of the velocity map for several dimensions, the
exponent bounds as the aspect ratio steepens, and which points sit in a
comparability window at a given time.
"""

from eastlab.theory import (
    in_scaling_window,
    map_fixed_point,
    theory_exponents,
)

print("fixed point of the velocity map (should be 1/d)")
for d in range(2, 6):
    res = map_fixed_point(d)
    print(f"  d = {d}: {res.value:.9f} in {res.steps} steps")

print()
print("exponent bounds in d = 2 as the target direction steepens")
print(f"{'beta':>6} {'bound':>8}")
for beta in (0.0, 0.25, 0.5, 0.75, 1.0):
    expo = theory_exponents(2, beta=beta, alpha=0.25)
    print(f"{beta:>6.2f} {expo['outstretched_bound']:>8.4f}")

print()
q, eps, t = 0.1, 0.5, 1e9
print(f"window membership at q = {q}, eps = {eps}, t = {t:.0e}")
for x in [(40, 40), (400, 400), (40, 4), (40, 0)]:
    inside = in_scaling_window(x, delta=0.1, eps=eps, t=t, q=q)
    print(f"  {x}: {'inside' if inside else 'outside'}")
