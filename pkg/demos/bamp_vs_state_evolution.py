"""
BAMP against its state evolution
================================

Run Bayes-optimal AMP on a 10000-dimensional sparse source and compare the
empirical error per iteration with the scalar recursion that predicts it.
"""

import numpy as np

from sdcs.codec import amp, gaussian_spec
from sdcs.presets import gmd_anchor
from sdcs.sd import state_evolution_fixed_point

prior = gmd_anchor()
n, delta = 10_000, 0.7
rng = np.random.default_rng(0)
x = prior.sample(n, rng)
A = gaussian_spec(n, int(delta * n), seed=1).matrix(0)

errors = []
result = amp(A @ x, A, lambda u, v: prior.posterior(u, v)[:2],
             callback=lambda t, xt: errors.append(np.mean((xt - x) ** 2)))
_, predicted = state_evolution_fixed_point(prior, delta, return_track=True)

print("iter   empirical   predicted   ratio")
for t in range(min(15, len(errors), len(predicted) - 1)):
    print(f"{t + 1:4d} {errors[t]:11.3e} {predicted[t + 1]:11.3e} {errors[t] / predicted[t + 1]:7.3f}")
print(f"\nstopped after {result.iterations} iterations; kept estimate MSE {np.mean((result.x - x) ** 2):.3e}")
print(f"fixed point {predicted[-1]:.3e}")
