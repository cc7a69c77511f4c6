"""Fit the front speed along the axis from mean infection times.

Each grid distance reuses the same replica streams, so sampling noise
largely cancels out of the slope. The normalized exponent rescales the
speed by the equilibrium time scale.
"""

from eastlab.dynamics import mean_hitting, velocity_fit

q = 0.25
replicas = 60

points = []
print(f"q = {q}, {replicas} replicas per point")
print(f"{'distance':>9} {'mean tau':>10} {'stderr':>8}")
for n in (6, 10, 14, 18, 22):
    est = mean_hitting((n,), q, replicas=replicas, seed=20)
    points.append((n, est.mean))
    print(f"{n:>9} {est.mean:>10.2f} {est.stderr:>8.2f}")

fit = velocity_fit(points, q)
print(f"velocity {fit.velocity:.4f}, r^2 {fit.r_squared:.4f}")
print(f"normalized exponent {fit.normalized_exponent:.3f} (theta = {fit.theta:.3f})")
