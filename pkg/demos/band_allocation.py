"""
Allocating samples across wavelet bands
=======================================

Hand out a fixed measurement budget over the six bands of a 256x256,
five-level transform and compare the predicted PSNR with the proportional
and scaling-band-first baselines.
"""

from sdcs.allocate import default_band_model, greedy_allocate, predicted_distortion, two_gender_allocate, uniform_allocate
from sdcs.presets import cameraman_gmd

model = default_band_model(cameraman_gmd())
curves = model.curves()
print("band sizes", model.sizes)

for delta in (0.05, 0.1, 0.15, 0.3):
    budget = int(round(delta * model.total))
    print(f"\ndelta={delta} ({budget} samples)")
    for name, alloc in (
        ("greedy", greedy_allocate(model, budget, curves)),
        ("uniform", uniform_allocate(model, budget)),
        ("two-gender", two_gender_allocate(model, budget)),
    ):
        _, psnr = predicted_distortion(model, alloc, curves)
        ratios = " ".join(f"{r:5.2f}" for r in alloc.ratios())
        print(f"  {name:10s} {psnr:6.2f} dB   ratios {ratios}")

# the coarse bands saturate first; at most a few bands are ever partially sampled
