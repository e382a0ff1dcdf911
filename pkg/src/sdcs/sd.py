"""Sample-distortion curves for the Gaussian encoder / Bayes-optimal AMP pair.

Curves come from the state-evolution fixed point of the prior's scalar MMSE
channel.  Two lower bounds are provided, an entropy-based one (``ebb``) and a
scale-mixture one (``mbb``), together with the convex envelope used by the
zeroing construction and the per-band distortion-reduction sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .priors import H_GAUSS, GgdPrior, Prior, VarianceMixture, scalar_mmse

DEFAULT_STEP = 0.005


class StateEvolutionError(RuntimeError):
    """Fixed-point iteration hit ``max_iter``; ``last`` holds the final iterate."""

    def __init__(self, msg, last):
        super().__init__(msg)
        self.last = last


@dataclass(frozen=True)
class SdCurve:
    deltas: np.ndarray
    distortions: np.ndarray
    source_variance: float
    convexified: bool = False
    delta_c: Optional[float] = None

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float)
        D = np.asarray(self.distortions, dtype=float)
        if d.shape != D.shape or d.ndim != 1 or d.size < 2:
            raise ValueError("deltas and distortions must be matching 1-D arrays")
        if d[0] != 0.0 or d[-1] != 1.0 or np.any(np.diff(d) <= 0):
            raise ValueError("deltas must increase strictly from 0 to 1")
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "distortions", D)

    def __call__(self, delta):
        """Linear interpolation of the distortion at ``delta``."""
        return np.interp(delta, self.deltas, self.distortions)

    def normalized(self) -> "SdCurve":
        """Same curve scaled to unit source variance."""
        if self.source_variance == 0:
            return replace(self, distortions=np.zeros_like(self.distortions), source_variance=1.0)
        return replace(
            self, distortions=self.distortions / self.source_variance, source_variance=1.0
        )


# ---------------------------------------------------------------------------
# State evolution
# ---------------------------------------------------------------------------

def state_evolution_fixed_point(
    prior: Prior,
    delta: float,
    tol: float = 1e-8,
    max_iter: int = 5000,
    mmse: Optional[Callable[[float], float]] = None,
    return_track: bool = False,
):
    """Iterate ``D <- mmse(D / delta)`` from ``D = Var(x)`` to its fixed point.

    ``mmse`` defaults to the prior's exact quadrature; ``sd_curve`` passes a
    tabulated surrogate instead.  With ``return_track`` the iterate sequence
    (starting at the prior variance) is returned alongside the fixed point.
    Full sampling returns 0 outright: the map is ``mmse(D) ~ D`` near zero, so
    iterating it converges only sublinearly.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    f = mmse if mmse is not None else (lambda v: scalar_mmse(prior, v))
    var = prior.variance()
    if delta == 1:
        return (0.0, np.array([var, 0.0])) if return_track else 0.0
    D = var
    track = [D]
    for _ in range(max_iter):
        nxt = f(D / delta)
        track.append(nxt)
        if abs(nxt - D) < tol * var:
            return (nxt, np.array(track)) if return_track else nxt
        D = nxt
    raise StateEvolutionError(f"state evolution did not converge at delta={delta}", D)


class MmseTable:
    """Cubic spline of ``log mmse`` against ``log v`` on a fixed grid.

    The exact quadrature is spot-checked on a subset of nodes under
    refinement (``scalar_mmse`` raises if a check fails).
    """

    def __init__(self, prior: Prior, v_range=None, points=None, check_every: int = 40):
        var = prior.variance()
        if isinstance(prior, GgdPrior):
            v_range = v_range or (1e-10, 1e5)
            points = points or 121
        else:
            v_range = v_range or (1e-12, 1e6)
            points = points or 241
        self.log_v = np.linspace(math.log(v_range[0] * var), math.log(v_range[1] * var), points)
        if isinstance(prior, GgdPrior):
            vals = [prior._mmse(math.exp(lv)) for lv in self.log_v]
        else:
            vals = [prior._mmse(math.exp(lv), 2000) for lv in self.log_v]
        for lv in self.log_v[::check_every]:
            scalar_mmse(prior, math.exp(lv))
        self.var = var
        self._low_ratio = vals[0] / math.exp(self.log_v[0])
        self._spline = CubicSpline(self.log_v, np.log(vals))

    def __call__(self, v: float) -> float:
        lv = math.log(v)
        if lv <= self.log_v[0]:
            return v * self._low_ratio
        if lv >= self.log_v[-1]:
            return self.var * v / (self.var + v)
        return math.exp(float(self._spline(lv)))


@lru_cache(maxsize=64)
def _mmse_table(prior: Prior) -> MmseTable:
    return MmseTable(prior)


def clear_cache():
    """Drop memoised curves and mmse tables (for timing cold runs)."""
    _sd_curve.cache_clear()
    _mmse_table.cache_clear()


def delta_grid(step: float = DEFAULT_STEP) -> np.ndarray:
    n = int(round(1.0 / step))
    if not math.isclose(n * step, 1.0, rel_tol=1e-9):
        raise ValueError("grid step must divide 1")
    return np.linspace(0.0, 1.0, n + 1)


def sd_curve(prior: Prior, grid_step: float = DEFAULT_STEP, tol: float = 1e-8, max_iter: int = 5000) -> SdCurve:
    """State-evolution SD curve on a uniform grid with analytic endpoints."""
    if not 0 < grid_step <= 0.05:
        raise ValueError("grid_step must lie in (0, 0.05]")
    return _sd_curve(prior, grid_step, tol, max_iter)


@lru_cache(maxsize=64)
def _sd_curve(prior, grid_step, tol, max_iter):
    deltas = delta_grid(grid_step)
    var = prior.variance()
    if getattr(prior, "is_gaussian", False):
        return SdCurve(deltas, var * (1.0 - deltas), var)
    table = _mmse_table(prior)
    D = np.empty_like(deltas)
    D[0], D[-1] = var, 0.0
    for i, d in enumerate(deltas[1:-1], start=1):
        D[i] = state_evolution_fixed_point(prior, d, tol=tol, max_iter=max_iter, mmse=table)
    return SdCurve(deltas, D, var)


def se_distortion(prior: Prior, delta: float) -> float:
    """State-evolution distortion at a single ratio, using the tabulated MMSE."""
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    var = prior.variance()
    if delta == 0:
        return var
    if delta == 1:
        return 0.0
    if getattr(prior, "is_gaussian", False):
        return var * (1.0 - delta)
    return state_evolution_fixed_point(prior, delta, mmse=_mmse_table(prior))


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def linear_sd(delta):
    """Per-unit-variance distortion of the pseudo-inverse decoder."""
    delta = np.asarray(delta, dtype=float)
    if np.any((delta < 0) | (delta > 1)):
        raise ValueError("delta must lie in [0, 1]")
    out = 1.0 - delta
    return float(out) if out.ndim == 0 else out


def ebb(prior: Prior, delta: float, entropy: Optional[float] = None) -> float:
    """Entropy-based lower bound on the MSE of any Lipschitz decoder.

    ``entropy`` (bits) may be passed to avoid recomputing it.
    """
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    if delta == 1:
        return 0.0
    var = prior.variance()
    h = prior.differential_entropy() if entropy is None else entropy
    gap = h - 0.5 * math.log2(var) - H_GAUSS
    return var * (1 - delta) * 2.0 ** (2 * gap / (1 - delta))


def mbb(mixture: VarianceMixture, delta: float) -> float:
    """Scale-mixture lower bound.

    Samples are spent on the highest-variance atoms first; the bound is the
    energy left in the atoms below the cutoff, interpolating linearly inside
    the atom that straddles it.
    """
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    taus, w = mixture.taus, mixture.weights
    cum = np.concatenate([[0.0], np.cumsum(w)])
    i = int(np.searchsorted(cum, delta, side="right")) - 1
    if i >= len(w):
        return 0.0
    tail = float(np.dot(w[i + 1:], taus[i + 1:]))
    return max(tail + (cum[i + 1] - delta) * taus[i], 0.0)


def bound_curves(prior: Prior, deltas) -> tuple[np.ndarray, np.ndarray]:
    """EBB and MBB evaluated on ``deltas``."""
    h = prior.differential_entropy()
    mix = prior.variance_mixture()
    e = np.array([ebb(prior, d, entropy=h) for d in deltas])
    m = np.array([mbb(mix, d) for d in deltas])
    return e, m


# ---------------------------------------------------------------------------
# Convexification and distortion reduction
# ---------------------------------------------------------------------------

def _lower_hull(x: np.ndarray, y: np.ndarray) -> list[int]:
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def convexify(curve: SdCurve) -> tuple[SdCurve, Optional[float]]:
    """Lower convex envelope and the critical ratio ``delta_c``.

    ``delta_c`` is the first envelope vertex after the origin anchor when the
    raw curve lies strictly above the chord leading to it; otherwise ``None``.
    """
    x, y = curve.deltas, curve.distortions
    hull = _lower_hull(x, y)
    env = np.interp(x, x[hull], y[hull])
    env = np.minimum(env, y)
    tol = 1e-9 * max(curve.source_variance, 1e-300)
    delta_c = None
    first = hull[1]
    if first > 1 and np.any(y[1:first] - env[1:first] > tol):
        delta_c = float(x[first])
    out = SdCurve(x, env, curve.source_variance, convexified=True, delta_c=delta_c)
    return out, delta_c


def dr_function(curve: SdCurve, sigma2: float, n: int) -> np.ndarray:
    """``sigma2 * [D(m/n) - D((m+1)/n)]`` for ``m = 0..n-1`` on the unit-variance curve."""
    if n < 1:
        raise ValueError("band size must be at least 1")
    unit = curve.normalized()
    D = unit(np.arange(n + 1) / n)
    return sigma2 * (D[:-1] - D[1:])


def partial_band_bound(beta: float, eta_at_0: float, eta_at_1: float) -> float:
    """Bound on the number of partially sampled bands, ``beta * log2(eta(0)/eta(1))``."""
    if not eta_at_0 >= eta_at_1 > 0:
        raise ValueError("need eta_at_0 >= eta_at_1 > 0")
    return beta * math.log2(eta_at_0 / eta_at_1)


def dr_range(curve: SdCurve) -> tuple[float, float]:
    """End slopes ``(-D'(0), -D'(1))`` of a convexified unit-variance curve."""
    unit = curve.normalized()
    d, D = unit.deltas, unit.distortions
    return (D[0] - D[1]) / (d[1] - d[0]), (D[-2] - D[-1]) / (d[-1] - d[-2])


def curve_table(prior: Prior, curve: SdCurve) -> dict[str, np.ndarray]:
    """Columns for the SD-curve CSV export."""
    env, _ = convexify(curve)
    e, m = bound_curves(prior, curve.deltas)
    return {
        "delta": curve.deltas,
        "distortion": curve.distortions,
        "bound_ebb": e,
        "bound_mbb": m,
        "convexified_distortion": env.distortions,
    }
