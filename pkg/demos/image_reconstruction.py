"""
Reconstructing an image from bandwise measurements
==================================================

Draw a 64x64 image whose wavelet states persist across scale, sample it at
30% with the greedy allocation, and decode with bandwise BAMP and with the
turbo scheme that also uses the tree structure.
"""

from sdcs.presets import average_gmd
from sdcs.priors import GmdPrior
from sdcs.sim import image_pipeline, synthetic_hmt_image
from sdcs.turbo import HmtParams, marginal_activity

params = HmtParams(0.5108, p11=0.95, p10=0.05)
table = average_gmd()
lam = marginal_activity(params, 5)
priors = [table[0]] + [GmdPrior(float(l), p.sigma_l2, p.sigma_s2) for l, p in zip(lam, table[1:])]

image, states = synthetic_hmt_image(priors, params, (64, 64), 5, seed=7)
common = dict(model_source="fixed", priors=priors, seed=7)

_, psnr_bamp, report = image_pipeline(image, 0.3, decoder="bamp", **common)
_, psnr_turbo, turbo = image_pipeline(image, 0.3, decoder="turbo", hmt_params=params, **common)

print("allocation", report["allocation"]["m"])
print(f"predicted {report['predicted_psnr']:.2f} dB, BAMP {psnr_bamp:.2f} dB, turbo {psnr_turbo:.2f} dB")
for row in turbo["turbo_trace"][:5]:
    print(f"  turbo iteration {row['iteration']}: {row['psnr']:.2f} dB")
