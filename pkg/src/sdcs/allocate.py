"""Bandwise sample allocation.

The optimal allocation for a fixed budget minimises ``sum_i s2_i n_i D_i(m_i/n_i)``
over integer ``m_i``.  With convex ``D_i`` this is solved exactly by handing out
samples one at a time to the band whose next sample removes the most
distortion (reverse water-filling).
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .priors import Prior, prior_from_dict, prior_to_dict
from .sd import SdCurve, convexify, dr_function, sd_curve


@dataclass(frozen=True)
class Band:
    """Coefficient count and prior; ``variance`` overrides the prior's when set.

    Curves are used at unit variance and rescaled, so the override only
    changes the band's energy, not the shape of its SD curve.
    """

    n: int
    prior: Prior
    variance: Optional[float] = None

    @property
    def sigma2(self) -> float:
        return self.prior.variance() if self.variance is None else float(self.variance)


@dataclass(frozen=True)
class BandModel:
    bands: tuple[Band, ...]

    def __post_init__(self):
        if not self.bands:
            raise ValueError("a band model needs at least one band")
        for b in self.bands:
            if b.n < 1:
                raise ValueError("band sizes must be positive")
            if not math.isfinite(b.sigma2) or b.sigma2 < 0:
                raise ValueError("band variances must be finite and nonnegative")
        object.__setattr__(self, "bands", tuple(self.bands))

    @classmethod
    def from_priors(cls, sizes: Sequence[int], priors: Sequence[Prior]) -> "BandModel":
        if len(sizes) != len(priors):
            raise ValueError("sizes and priors differ in length")
        return cls(tuple(Band(int(n), p) for n, p in zip(sizes, priors)))

    @property
    def sizes(self) -> list[int]:
        return [b.n for b in self.bands]

    @property
    def variances(self) -> list[float]:
        return [b.sigma2 for b in self.bands]

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def __len__(self):
        return len(self.bands)

    def curves(self, grid_step: float = 0.005) -> list[SdCurve]:
        """Convexified SD curve of every band."""
        return [convexify(sd_curve(b.prior, grid_step))[0] for b in self.bands]

    def to_dict(self) -> dict:
        return {"bands": [{"n": b.n, "prior": prior_to_dict(b.prior), "variance": b.sigma2} for b in self.bands]}

    @classmethod
    def from_dict(cls, d: dict) -> "BandModel":
        return cls(tuple(Band(int(b["n"]), prior_from_dict(b["prior"]), b.get("variance")) for b in d["bands"]))


@dataclass
class Allocation:
    m: list[int]
    band_sizes: Optional[list[int]] = field(default=None)

    def __post_init__(self):
        self.m = [int(v) for v in self.m]
        if self.band_sizes is not None:
            self.band_sizes = [int(v) for v in self.band_sizes]
            if len(self.band_sizes) != len(self.m):
                raise ValueError("allocation length does not match band count")
            for mi, ni in zip(self.m, self.band_sizes):
                if not 0 <= mi <= ni:
                    raise ValueError(f"band allocation {mi} outside [0, {ni}]")
        elif any(v < 0 for v in self.m):
            raise ValueError("negative allocation")

    @property
    def budget(self) -> int:
        return sum(self.m)

    def ratios(self) -> list[float]:
        return [mi / ni for mi, ni in zip(self.m, self.band_sizes)]

    def to_dict(self) -> dict:
        return {"band_sizes": self.band_sizes, "m": self.m, "budget": self.budget}

    @classmethod
    def from_dict(cls, d: dict) -> "Allocation":
        alloc = cls(d["m"], d.get("band_sizes"))
        if "budget" in d and d["budget"] != alloc.budget:
            raise ValueError("budget does not match allocation")
        return alloc


def _check_budget(model: BandModel, budget: int):
    if budget < 0 or budget > model.total:
        raise ValueError(f"budget {budget} outside [0, {model.total}]")


def _unit_curve(curve: SdCurve):
    unit = curve.normalized()
    return unit.deltas, unit.distortions


def band_objective(model: BandModel, curves: Sequence[SdCurve], m: Sequence[int]) -> float:
    """Total distortion ``sum_i s2_i n_i D_i(m_i/n_i)``."""
    total = 0.0
    for b, c, mi in zip(model.bands, curves, m):
        x, D = _unit_curve(c)
        total += b.sigma2 * b.n * float(np.interp(mi / b.n, x, D))
    return total


def _gain_key(gain: float) -> float:
    # 12 significant digits, so rounding noise on linear segments cannot decide ties
    return float(f"{gain:.12g}")


def greedy_allocate(model: BandModel, budget: int, curves: Sequence[SdCurve]) -> Allocation:
    """Reverse water-filling on the discretised distortion-reduction functions.

    The heap is keyed on the total distortion removed by one more sample in a
    band, ``n_i * eta_i(m_i)``.  Equal gains go to the band with the smaller
    sampled fraction, then to the lower band index.
    """
    _check_budget(model, budget)
    if len(curves) != len(model):
        raise ValueError("need one curve per band")
    gains = [b.n * dr_function(c, b.sigma2, b.n) for b, c in zip(model.bands, curves)]
    sizes = model.sizes
    m = [0] * len(model)
    heap = [(-_gain_key(g[0]), 0.0, i) for i, g in enumerate(gains)]
    heapq.heapify(heap)
    for _ in range(budget):
        _, _, i = heapq.heappop(heap)
        m[i] += 1
        if m[i] < sizes[i]:
            heapq.heappush(heap, (-_gain_key(gains[i][m[i]]), m[i] / sizes[i], i))
    return Allocation(m, sizes)


def brute_force_allocate(model: BandModel, budget: int, curves: Sequence[SdCurve], limit: int = 10**6) -> Allocation:
    """Exhaustive minimiser of the band objective (small instances only)."""
    _check_budget(model, budget)
    if math.prod(n + 1 for n in model.sizes) > limit:
        raise ValueError("instance too large for exhaustive search")
    tables = []
    for b, c in zip(model.bands, curves):
        x, D = _unit_curve(c)
        tables.append(b.sigma2 * b.n * np.interp(np.arange(b.n + 1) / b.n, x, D))
    best, best_m = math.inf, None
    for head in itertools.product(*(range(n + 1) for n in model.sizes[:-1])):
        last = budget - sum(head)
        if not 0 <= last <= model.sizes[-1]:
            continue
        m = head + (last,)
        val = sum(t[mi] for t, mi in zip(tables, m))
        if val < best:
            best, best_m = val, m
    return Allocation(list(best_m), model.sizes)


def _largest_remainder(weights: Sequence[float], budget: int, caps: Sequence[int]) -> list[int]:
    w = np.asarray(weights, dtype=float)
    caps = np.asarray(caps)
    m = np.zeros(len(w), dtype=int)
    left = budget
    active = np.ones(len(w), dtype=bool)
    # redistribute whenever a band saturates
    while left > 0:
        share = np.where(active, w, 0.0)
        if share.sum() == 0:
            raise ValueError("budget exceeds capacity")
        exact = left * share / share.sum()
        take = np.minimum(np.floor(exact).astype(int), caps - m)
        m += take
        left -= int(take.sum())
        rem = np.where(active & (m < caps), exact - np.floor(exact), -1.0)
        for i in np.argsort(-rem, kind="stable"):
            if left == 0 or rem[i] < 0:
                break
            m[i] += 1
            left -= 1
        active = m < caps
    return m.tolist()


def uniform_allocate(model: BandModel, budget: int) -> Allocation:
    """Samples proportional to band size (homogeneous Gaussian encoder)."""
    _check_budget(model, budget)
    return Allocation(_largest_remainder(model.sizes, budget, model.sizes), model.sizes)


def two_gender_allocate(model: BandModel, budget: int) -> Allocation:
    """Fully sample the scaling band; spread the rest proportionally."""
    _check_budget(model, budget)
    n0 = model.sizes[0]
    if budget < n0:
        raise ValueError("budget smaller than the scaling band")
    rest = _largest_remainder(model.sizes[1:], budget - n0, model.sizes[1:]) if len(model) > 1 else []
    return Allocation([n0] + rest, model.sizes)


def mse_to_psnr(mse: float, max_db: float = 100.0) -> float:
    """Unit-peak PSNR, capped at ``max_db``."""
    if mse <= 10 ** (-max_db / 10):
        return max_db
    return -10.0 * math.log10(mse)


def predicted_distortion(model: BandModel, allocation: Allocation, curves: Sequence[SdCurve], max_db: float = 100.0):
    """Per-pixel MSE and PSNR predicted by the band SD curves."""
    for mi, ni in zip(allocation.m, model.sizes):
        if not 0 <= mi <= ni:
            raise ValueError("allocation does not fit the model")
    mse = band_objective(model, curves, allocation.m) / model.total
    return mse, mse_to_psnr(mse, max_db)


def dr_thresholds(model: BandModel, allocation: Allocation, curves: Sequence[SdCurve]) -> list[Optional[float]]:
    """Per-sample gain of the next sample in each band (``None`` if saturated)."""
    out = []
    for b, c, mi in zip(model.bands, curves, allocation.m):
        if mi >= b.n:
            out.append(None)
        else:
            out.append(float(b.n * dr_function(c, b.sigma2, b.n)[mi]))
    return out


def default_band_model(priors: Sequence[Prior], shape=(256, 256), levels: int = 5) -> BandModel:
    """Band model on the geometry of a square ``levels``-level transform."""
    from .wavelet import band_sizes

    return BandModel.from_priors(band_sizes(shape, levels), priors)
