"""
Sample-distortion curves and their lower bounds
===============================================

Trace the BAMP sample-distortion curve of a sparse Gaussian mixture, compare
it with the entropy- and mixture-based bounds, and find the ratio below which
zeroing part of the coefficients beats sensing all of them.
"""

import numpy as np

from sdcs.presets import gmd_anchor
from sdcs.sd import bound_curves, convexify, sd_curve

prior = gmd_anchor()
curve = sd_curve(prior)
envelope, delta_c = convexify(curve)
ebb, mbb = bound_curves(prior, curve.deltas)

print(f"source variance {prior.variance():.5f}, critical ratio {delta_c:.3f}")
print(" delta      BAMP     convex      EBB       MBB")
for d in np.arange(0.1, 1.0, 0.1):
    i = int(round(d / 0.005))
    print(f"{curve.deltas[i]:6.2f} {curve.distortions[i]:9.5f} {envelope.distortions[i]:9.5f} "
          f"{ebb[i]:9.5f} {mbb[i]:9.5f}")

# below delta_c the envelope is the chord to the curve at delta_c: sense a
# fraction delta/delta_c of the coefficients at ratio delta_c, zero the rest
d = 0.3
t = d / delta_c
print(f"\nat delta={d}: sense {t:.2f} of the band, distortion {envelope(d):.5f} vs {curve(d):.5f}")
