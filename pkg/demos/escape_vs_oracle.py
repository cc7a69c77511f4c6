"""Monte Carlo escape probabilities against the exact transient solve.

Small targets keep the exact computation cheap, so the two columns can
be compared directly; the interval is a 95 percent Wilson interval.
"""

from eastlab.pathspace import escape_oracle, escape_probability

q = 0.2
t = 5.0

print(f"q = {q}, horizon t = {t}")
print(f"{'target':>8} {'exact':>10} {'sampled':>10} {'95% interval':>22}")
for x, L, replicas in [((1, 1), 2, 1500), ((2, 1), 2, 2000), ((2,), 2, 2000)]:
    est = escape_probability(x, L, q, t, replicas=replicas, seed=4)
    exact = escape_oracle(x, L, q, t)
    band = f"[{est.ci_low:.4f}, {est.ci_high:.4f}]"
    flag = "" if est.ci_low <= exact <= est.ci_high else "  <- outside!"
    print(f"{str(x):>8} {exact:>10.5f} {est.probability:>10.5f} {band:>22}{flag}")
