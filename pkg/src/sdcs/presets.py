"""Named parameter sets: the two anchor priors and reference wavelet band
statistics of a 256x256, five-level Daubechies-2 decomposition."""
from __future__ import annotations

import copy

from .priors import GgdPrior, GmdPrior, Prior, prior_from_dict

GMD_ANCHOR = {"kind": "gmd", "lambda": 0.38, "sigma_L2": 1.198, "sigma_S2": 0.004}
GGD_ANCHOR = {"kind": "ggd", "alpha": 0.4, "sigma2": 1.0}

# scaling band is modelled as Gaussian with this mean square
SCALING_MEAN_SQUARE = 261.4383

CAMERAMAN_GMD = [
    {"kind": "gaussian", "sigma2": SCALING_MEAN_SQUARE},
    {"kind": "gmd", "lambda": 0.4155, "sigma_L2": 4.4215, "sigma_S2": 0.3331},
    {"kind": "gmd", "lambda": 0.5309, "sigma_L2": 0.8542, "sigma_S2": 0.0038},
    {"kind": "gmd", "lambda": 0.4842, "sigma_L2": 0.1856, "sigma_S2": 0.0004},
    {"kind": "gmd", "lambda": 0.3664, "sigma_L2": 0.0453, "sigma_S2": 0.0002},
    {"kind": "gmd", "lambda": 0.2792, "sigma_L2": 0.0115, "sigma_S2": 0.0001},
]

CAMERAMAN_GGD = [
    {"kind": "gaussian", "sigma2": SCALING_MEAN_SQUARE},
    {"kind": "ggd", "alpha": 0.7, "sigma2": 2.0822},
    {"kind": "ggd", "alpha": 0.4, "sigma2": 0.4559},
    {"kind": "ggd", "alpha": 0.3, "sigma2": 0.0902},
    {"kind": "ggd", "alpha": 0.3, "sigma2": 0.0167},
    {"kind": "ggd", "alpha": 0.4, "sigma2": 0.0033},
]

# averaged natural-image statistics; they cover detail bands only, so
# the cameraman one stands in
AVERAGE_GMD = [
    {"kind": "gaussian", "sigma2": SCALING_MEAN_SQUARE},
    {"kind": "gmd", "lambda": 0.5108, "sigma_L2": 3.6910, "sigma_S2": 0.4596},
    {"kind": "gmd", "lambda": 0.4374, "sigma_L2": 0.7506, "sigma_S2": 0.0490},
    {"kind": "gmd", "lambda": 0.4076, "sigma_L2": 0.1595, "sigma_S2": 0.0075},
    {"kind": "gmd", "lambda": 0.3616, "sigma_L2": 0.0385, "sigma_S2": 0.0015},
    {"kind": "gmd", "lambda": 0.3137, "sigma_L2": 0.0081, "sigma_S2": 0.0003},
]

_GEOMETRY = {"shape": [256, 256], "levels": 5}

PRESETS = {
    "gmd-anchor": {"prior": GMD_ANCHOR, "grid_step": 0.005},
    "ggd-anchor": {"prior": GGD_ANCHOR, "grid_step": 0.005},
    "gaussian": {"prior": {"kind": "gaussian", "sigma2": 1.0}, "grid_step": 0.005},
    "cameraman-gmd": {"priors": CAMERAMAN_GMD, **_GEOMETRY},
    "cameraman-ggd": {"priors": CAMERAMAN_GGD, **_GEOMETRY},
    "average-gmd": {"priors": AVERAGE_GMD, **_GEOMETRY},
    # greedy allocation profile at 10% sampling for the averaged statistics
    "average-gsa": {"priors": AVERAGE_GMD, **_GEOMETRY, "delta": 0.1, "allocator": "greedy"},
}


def preset(name: str) -> dict:
    """Deep copy of a named preset configuration."""
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def preset_priors(name: str) -> list[Prior]:
    cfg = preset(name)
    if "priors" in cfg:
        return [prior_from_dict(d) for d in cfg["priors"]]
    return [prior_from_dict(cfg["prior"])]


def gmd_anchor() -> GmdPrior:
    return prior_from_dict(GMD_ANCHOR)


def ggd_anchor() -> GgdPrior:
    return prior_from_dict(GGD_ANCHOR)


def cameraman_gmd() -> list[Prior]:
    return preset_priors("cameraman-gmd")


def average_gmd() -> list[Prior]:
    return preset_priors("average-gmd")


__all__ = ["PRESETS", "preset", "preset_priors", "gmd_anchor", "ggd_anchor", "cameraman_gmd",
           "average_gmd"]
