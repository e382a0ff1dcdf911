"""Orthonormal 2-D Daubechies-2 transform with periodic boundaries, band
grouping, the detail-coefficient quad-tree and per-band prior estimation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .priors import GgdPrior, GmdPrior

_S3 = math.sqrt(3.0)
DB2 = np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * math.sqrt(2.0))
DB2_HIGH = np.array([(-1) ** k * DB2[3 - k] for k in range(4)])

ORIENTATIONS = ("LH", "HL", "HH")


@dataclass
class WaveletPyramid:
    """Scaling block plus ``(LH, HL, HH)`` detail blocks, coarsest level first."""

    scaling: np.ndarray
    details: list

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def height(self) -> int:
        return self.scaling.shape[0] << self.levels

    @property
    def width(self) -> int:
        return self.scaling.shape[1] << self.levels

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def coefficients(self) -> np.ndarray:
        return np.concatenate(band_vectorize(self))

    @classmethod
    def zeros(cls, shape, levels: int) -> "WaveletPyramid":
        h, w = _check_shape(shape, levels)
        details = []
        for j in range(levels, 0, -1):
            bh, bw = h >> j, w >> j
            details.append(tuple(np.zeros((bh, bw)) for _ in ORIENTATIONS))
        return cls(np.zeros((h >> levels, w >> levels)), details)


def _check_shape(shape, levels: int) -> tuple[int, int]:
    h, w = int(shape[0]), int(shape[1])
    if levels < 1:
        raise ValueError("need at least one decomposition level")
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(f"image shape {h}x{w} not divisible by 2^{levels}")
    return h, w


def _analyze(x: np.ndarray, axis: int):
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(4)) % n
    taps = x[..., idx]
    lo, hi = taps @ DB2, taps @ DB2_HIGH
    return np.moveaxis(lo, -1, axis), np.moveaxis(hi, -1, axis)


def _synthesize(lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    lo = np.moveaxis(lo, axis, -1)
    hi = np.moveaxis(hi, axis, -1)
    n = 2 * lo.shape[-1]
    out = np.zeros(lo.shape[:-1] + (n,))
    for k in range(4):
        up = np.zeros_like(out)
        up[..., ::2] = lo * DB2[k] + hi * DB2_HIGH[k]
        out += np.roll(up, k, axis=-1)
    return np.moveaxis(out, -1, axis)


def dwt2(image, levels: int) -> WaveletPyramid:
    """Multi-level separable db2 analysis."""
    a = np.asarray(image, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-D image")
    _check_shape(a.shape, levels)
    details = []
    for _ in range(levels):
        lo, hi = _analyze(a, 1)
        ll, lh = _analyze(lo, 0)
        hl, hh = _analyze(hi, 0)
        details.append((lh, hl, hh))
        a = ll
    return WaveletPyramid(a, details[::-1])


def idwt2(pyramid: WaveletPyramid) -> np.ndarray:
    a = np.asarray(pyramid.scaling, dtype=float)
    for lh, hl, hh in pyramid.details:
        lo = _synthesize(a, lh, 0)
        hi = _synthesize(hl, hh, 0)
        a = _synthesize(lo, hi, 1)
    return a


def band_sizes(shape, levels: int) -> list[int]:
    h, w = _check_shape(shape, levels)
    sizes = [(h >> levels) * (w >> levels)]
    for j in range(levels, 0, -1):
        sizes.append(3 * (h >> j) * (w >> j))
    return sizes


def band_vectorize(pyramid: WaveletPyramid) -> list[np.ndarray]:
    """Band 0 is the scaling block; band ``j`` concatenates the three
    orientations at the ``j``-th coarsest detail level."""
    bands = [pyramid.scaling.ravel().copy()]
    for blocks in pyramid.details:
        bands.append(np.concatenate([b.ravel() for b in blocks]))
    return bands


def band_unvectorize(bands, shape, levels: int) -> WaveletPyramid:
    pyr = WaveletPyramid.zeros(shape, levels)
    if len(bands) != levels + 1:
        raise ValueError("band count does not match the number of levels")
    if np.size(bands[0]) != pyr.scaling.size:
        raise ValueError("scaling band has the wrong size")
    scaling = np.asarray(bands[0], dtype=float).reshape(pyr.scaling.shape)
    details = []
    for vec, blocks in zip(bands[1:], pyr.details):
        vec = np.asarray(vec, dtype=float)
        size = blocks[0].size
        if vec.size != 3 * size:
            raise ValueError("detail band has the wrong size")
        details.append(tuple(vec[o * size:(o + 1) * size].reshape(blocks[0].shape) for o in range(3)))
    return WaveletPyramid(scaling, details)


# ---------------------------------------------------------------------------
# Quad-tree over detail coefficients
# ---------------------------------------------------------------------------

@dataclass
class QuadTree:
    """Parent/child links over detail coefficients in band-vectorized order.

    Node ids index the concatenation of bands ``1..L``; ``scale[k]`` is the
    band index (1 = coarsest) of node ``k``.
    """

    parent: np.ndarray
    children: np.ndarray
    scale: np.ndarray
    offsets: list[int]

    @property
    def size(self) -> int:
        return self.parent.size

    @property
    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.parent < 0)

    @property
    def levels(self) -> int:
        return len(self.offsets) - 1

    def band_slice(self, j: int) -> slice:
        """Node range of band ``j`` (1-based)."""
        return slice(self.offsets[j - 1], self.offsets[j])


def quad_tree_index(pyramid_or_shape, levels: int | None = None) -> QuadTree:
    if isinstance(pyramid_or_shape, WaveletPyramid):
        shape, levels = pyramid_or_shape.shape, pyramid_or_shape.levels
    else:
        shape = pyramid_or_shape
    if levels is None or levels < 2:
        raise ValueError("a quad-tree needs at least two detail levels")
    h, w = _check_shape(shape, levels)
    dims = [(h >> j, w >> j) for j in range(levels, 0, -1)]
    offsets = [0]
    for bh, bw in dims:
        offsets.append(offsets[-1] + 3 * bh * bw)
    total = offsets[-1]
    parent = np.full(total, -1, dtype=np.int64)
    children = np.full((total, 4), -1, dtype=np.int64)
    scale = np.empty(total, dtype=np.int64)
    for j, (bh, bw) in enumerate(dims, start=1):
        scale[offsets[j - 1]:offsets[j]] = j
        if j == 1:
            continue
        ph, pw = dims[j - 2]
        o, r, c = np.meshgrid(np.arange(3), np.arange(bh), np.arange(bw), indexing="ij")
        node = offsets[j - 1] + (o * bh + r) * bw + c
        par = offsets[j - 2] + (o * ph + r // 2) * pw + c // 2
        slot = 2 * (r % 2) + (c % 2)
        parent[node.ravel()] = par.ravel()
        children[par.ravel(), slot.ravel()] = node.ravel()
    return QuadTree(parent, children, scale, offsets)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

def _gauss_loglik(x2, var):
    return -0.5 * (np.log(2 * np.pi * var) + x2 / var)


def estimate_gmd(coeffs, max_iter: int = 500, tol: float = 1e-6, return_trace: bool = False):
    """Zero-mean two-component Gaussian mixture fitted by EM.

    Initialised by splitting at the median of ``|x|``.  The data is scaled to
    unit mean square first, so the relative stopping rule does not depend on
    the units.  With ``return_trace`` the per-iteration mean log-likelihood
    (of the scaled data) is returned as well.
    """
    x = np.asarray(coeffs, dtype=float).ravel()
    if x.size < 4:
        raise ValueError("need at least 4 coefficients")
    x2 = x * x
    scale = float(x2.mean())
    if not scale > 0:
        raise ValueError("degenerate band: all coefficients are zero")
    x2 = x2 / scale
    floor = 1e-12
    med = np.median(np.abs(x))
    big = np.abs(x) > med
    if not big.any() or big.all():
        big = np.abs(x) >= med
    vl = max(x2[big].mean(), floor)
    vs = max(x2[~big].mean() if (~big).any() else vl * 1e-2, floor)
    lam = 0.5
    trace = []
    prev = -np.inf
    for _ in range(max_iter):
        a1 = np.log(lam) + _gauss_loglik(x2, vl)
        a0 = np.log1p(-lam) + _gauss_loglik(x2, vs)
        top = np.maximum(a1, a0)
        ll_each = top + np.log(np.exp(a1 - top) + np.exp(a0 - top))
        ll = float(ll_each.mean())
        trace.append(ll)
        r = np.exp(a1 - ll_each)
        if np.isfinite(prev) and abs(ll - prev) <= tol * abs(prev):
            break
        prev = ll
        s1 = r.sum()
        lam = min(max(s1 / x.size, 1e-12), 1 - 1e-12)
        vl = max(np.dot(r, x2) / max(s1, 1e-300), floor)
        vs = max(np.dot(1 - r, x2) / max(x.size - s1, 1e-300), floor)
    if vs > vl:
        lam, vl, vs = 1 - lam, vs, vl
    prior = GmdPrior(float(lam), float(vl * scale), float(vs * scale))
    return (prior, np.array(trace)) if return_trace else prior


def ggd_kurtosis(alpha):
    """Kurtosis ``Gamma(5/a) Gamma(1/a) / Gamma(3/a)^2`` of a GGD."""
    a = np.asarray(alpha, dtype=float)
    return np.exp(gammaln(5 / a) + gammaln(1 / a) - 2 * gammaln(3 / a))


def estimate_ggd(coeffs, bracket=(0.05, 2.0)) -> GgdPrior:
    """Moment matching: variance from the second moment, shape from kurtosis."""
    x = np.asarray(coeffs, dtype=float).ravel()
    if x.size < 4:
        raise ValueError("need at least 4 coefficients")
    m2 = float(np.mean(x * x))
    if m2 <= 0:
        raise ValueError("degenerate band: all coefficients are zero")
    kurt = float(np.mean(x**4)) / m2**2
    lo, hi = bracket
    if kurt < 1.8:
        warnings.warn(f"sample kurtosis {kurt:.3f} below the GGD range; using alpha=2", RuntimeWarning)
    if kurt <= ggd_kurtosis(hi):
        return GgdPrior(hi, m2)
    if kurt >= ggd_kurtosis(lo):
        return GgdPrior(lo, m2)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ggd_kurtosis(mid) > kurt:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return GgdPrior(0.5 * (lo + hi), m2)


def estimate_band_priors(image, levels: int = 5, kind: str = "gmd") -> list:
    """Per-band priors of an image; band 0 is modelled as Gaussian."""
    from .priors import gaussian

    bands = band_vectorize(dwt2(image, levels))
    priors = [gaussian(float(np.mean(bands[0] ** 2)))]
    for b in bands[1:]:
        priors.append(estimate_gmd(b) if kind == "gmd" else estimate_ggd(b))
    return priors
