"""Worst-start distance to equilibrium over time, three ways.

The exact curve maximises over every start; the all-ones curve follows
one start; sampling adds noise on top of that. All three agree on when
the chain is close to equilibrium.
"""

import numpy as np

from eastlab.cutoff import cutoff_curve

q = 0.3
ts = np.linspace(0.0, 60.0, 13)

exact = cutoff_curve(1, 2, q, ts, mode="exact")
ones = cutoff_curve(1, 2, q, ts, mode="all_ones")
mc = cutoff_curve(1, 2, q, ts, mode="monte_carlo", replicas=600, seed=3)

print(f"2x2 box at q = {q}")
print(f"{'t':>6} {'exact':>9} {'all_ones':>9} {'sampled':>9}")
for j, t in enumerate(ts):
    print(
        f"{t:>6.0f} {exact.values[j]:>9.4f} {ones.values[j]:>9.4f} "
        f"{mc.values[j]:>9.4f}"
    )
print(f"time to distance 1/4: {exact.crossing_time(0.25):.2f}")
