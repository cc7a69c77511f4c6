"""Grow the infected droplet from a single vacancy and picture it.

Writes droplet.ppm next to this script: white was never touched, grey
has updated at least once, black is vacant right now. The grey region is
the history of the front; the black speckle inside is the equilibrium
density q.
"""

import os

from eastlab.dynamics import LazyQuadrant, run_trajectory
from eastlab.render import shape_render

q = 0.2
t_max = 400.0

res = run_trajectory(
    LazyQuadrant(2), q, seed=12, t_max=t_max, record_events=True
)
out = os.path.join(os.path.dirname(__file__) or ".", "droplet.ppm")
shape_render(res, t_max, out)

vacant_now = sum(1 for _ in res.infections)
print(f"ran to t = {t_max} with {res.n_events} updates")
print(f"tracked extent {res.tracked_extent}, {vacant_now} sites touched")
print(f"wrote {out}")
