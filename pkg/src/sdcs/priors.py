"""Scalar compressive priors: two-state Gaussian mixture (GMD) and generalized
Gaussian (GGD).

Each prior exposes its density, second moment, sampler, scalar MMSE denoiser,
the expected denoising error under additive Gaussian noise, its differential
entropy (bits) and a Gaussian scale-mixture representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, logsumexp, roots_legendre

H_GAUSS = 0.5 * math.log2(2 * math.pi * math.e)
"""Differential entropy (bits) of a unit-variance Gaussian."""

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class QuadratureError(RuntimeError):
    """Raised when a quadrature rule does not settle under refinement."""


@lru_cache(maxsize=None)
def _legendre(n: int):
    return roots_legendre(n)


def _panel_rule(edges: np.ndarray, order: int):
    """Composite Gauss-Legendre nodes/weights over consecutive ``edges``."""
    gx, gw = _legendre(order)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    nodes = (mid[:, None] + half[:, None] * gx).ravel()
    weights = (half[:, None] * gw).ravel()
    return nodes, weights


def _check_noise_var(noise_var):
    if not np.all(np.asarray(noise_var) > 0):
        raise ValueError("noise_var must be positive")


# ---------------------------------------------------------------------------
# Variance mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceMixture:
    """Discrete Gaussian scale mixture: ``sum_i w_i N(0, tau_i)``.

    Atoms are kept sorted by variance, largest first.
    """

    taus: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if taus.shape != weights.shape or taus.ndim != 1 or taus.size == 0:
            raise ValueError("taus and weights must be matching 1-D arrays")
        if np.any(taus <= 0):
            raise ValueError("mixture variances must be positive")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
            raise ValueError("mixture weights must be a probability vector")
        order = np.argsort(-taus, kind="stable")
        taus, weights = taus[order], weights[order]
        if np.any(np.diff(taus) >= 0):
            raise ValueError("mixture variances must be distinct")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "weights", weights)

    @property
    def atoms(self):
        return list(zip(self.taus.tolist(), self.weights.tolist()))

    def variance(self) -> float:
        return float(np.dot(self.taus, self.weights))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        t = self.taus.reshape((-1,) + (1,) * x.ndim)
        w = self.weights.reshape(t.shape)
        dens = w * np.exp(-0.5 * x**2 / t - 0.5 * np.log(t) - _LOG_SQRT_2PI)
        return dens.sum(axis=0)


# ---------------------------------------------------------------------------
# GMD
# ---------------------------------------------------------------------------

def gmd_posterior(y, noise_var, lam, sigma_l2, sigma_s2):
    """Posterior mean, variance and large-state probability for a GMD.

    ``lam`` may be an array broadcastable against ``y`` (per-coefficient
    activity rates); variances are scalars.
    """
    y = np.asarray(y, dtype=float)
    v = noise_var
    lam = np.asarray(lam, dtype=float)
    vl, vs = sigma_l2 + v, sigma_s2 + v
    with np.errstate(divide="ignore"):
        a1 = np.log(lam) - 0.5 * np.log(vl) - 0.5 * y * y / vl
        a0 = np.log1p(-lam) - 0.5 * np.log(vs) - 0.5 * y * y / vs
    top = np.maximum(a1, a0)
    e1, e0 = np.exp(a1 - top), np.exp(a0 - top)
    p1 = e1 / (e1 + e0)
    p0 = 1.0 - p1
    g1, g0 = sigma_l2 / vl, sigma_s2 / vs
    m1, m0 = g1 * y, g0 * y
    mean = p1 * m1 + p0 * m0
    var = p1 * g1 * v + p0 * g0 * v + p1 * p0 * (m1 - m0) ** 2
    return mean, var, p1


@dataclass(frozen=True)
class GmdPrior:
    """``lam * N(0, sigma_l2) + (1 - lam) * N(0, sigma_s2)``."""

    lam: float
    sigma_l2: float
    sigma_s2: float

    kind = "gmd"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"activity rate must lie in [0, 1], got {self.lam}")
        if not self.sigma_l2 >= self.sigma_s2 >= 0.0:
            raise ValueError("need sigma_l2 >= sigma_s2 >= 0")
        if self.sigma_l2 <= 0.0:
            raise ValueError("sigma_l2 must be positive")

    @property
    def is_gaussian(self) -> bool:
        return self.lam == 1.0 or self.sigma_l2 == self.sigma_s2

    def variance(self) -> float:
        return self.lam * self.sigma_l2 + (1.0 - self.lam) * self.sigma_s2

    def _components(self):
        comps = []
        if self.lam > 0:
            comps.append((self.lam, self.sigma_l2))
        if self.lam < 1:
            comps.append((1.0 - self.lam, self.sigma_s2))
        return comps

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, s2 in self._components():
            if s2 == 0.0:
                continue  # point mass has no density
            out = out + w * np.exp(-0.5 * x * x / s2) / math.sqrt(2 * math.pi * s2)
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        states = rng.random(n) < self.lam
        scale = np.where(states, math.sqrt(self.sigma_l2), math.sqrt(self.sigma_s2))
        return scale * rng.standard_normal(n)

    def posterior(self, y, noise_var):
        """Return ``(mean, variance, p(large state | y))``."""
        _check_noise_var(noise_var)
        return gmd_posterior(y, noise_var, self.lam, self.sigma_l2, self.sigma_s2)

    def scalar_mmse(self, noise_var: float, order: int = 2000, rtol: float = 1e-6) -> float:
        _check_noise_var(noise_var)
        prev = self._mmse(noise_var, order)
        for _ in range(2):
            order *= 2
            cur = self._mmse(noise_var, order)
            if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
                return cur
            prev = cur
        raise QuadratureError(f"GMD mmse did not converge at noise_var={noise_var}")

    def _mmse(self, v: float, order: int) -> float:
        # E[Var(x | y)], y ~ N(0, s2 + v) given the state; integrand is
        # non-negative so there is no cancellation at small v.
        if self.is_gaussian:
            s2 = self.variance()
            return s2 * v / (s2 + v)
        x, w = _legendre(order)
        u = 12.0 * x
        wu = 12.0 * w * np.exp(-0.5 * u * u - _LOG_SQRT_2PI)
        total = 0.0
        for pw, s2 in self._components():
            _, pv, _ = self.posterior(math.sqrt(s2 + v) * u, v)
            total += pw * float(np.dot(wu, pv))
        return total

    def differential_entropy(self) -> float:
        if self.is_gaussian:
            return 0.5 * math.log2(2 * math.pi * math.e * self.variance())
        if self.sigma_s2 == 0.0:
            raise ValueError("entropy undefined for a mixture with a point mass")

        def integrand(t):
            p = float(self.pdf(t))
            return -p * math.log2(p) if p > 0 else 0.0

        sl, ss = math.sqrt(self.sigma_l2), math.sqrt(self.sigma_s2)
        cuts = sorted({0.0, 4 * ss, 12 * ss, 4 * sl, 40 * sl})
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            val, err = integrate.quad(integrand, a, b, limit=200, epsabs=1e-12, epsrel=1e-10)
            if err > 1e-7:
                raise QuadratureError("entropy integral did not converge")
            total += val
        return 2.0 * total

    def variance_mixture(self) -> VarianceMixture:
        if self.is_gaussian:
            return VarianceMixture(np.array([self.variance()]), np.array([1.0]))
        if self.sigma_s2 == 0.0:
            raise ValueError("point-mass component has no Gaussian representation")
        return VarianceMixture(
            np.array([self.sigma_l2, self.sigma_s2]), np.array([self.lam, 1.0 - self.lam])
        )

    def to_dict(self) -> dict:
        return {"kind": "gmd", "lambda": self.lam, "sigma_L2": self.sigma_l2, "sigma_S2": self.sigma_s2}


def gaussian(variance: float) -> GmdPrior:
    """Zero-mean Gaussian expressed as a degenerate GMD."""
    return GmdPrior(1.0, variance, variance)


# ---------------------------------------------------------------------------
# GGD
# ---------------------------------------------------------------------------

# Gaver-Stehfest weights, order 14.
def _stehfest_weights(order: int) -> np.ndarray:
    half = order // 2
    out = []
    for k in range(1, order + 1):
        acc = 0
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += (
                j**half * math.factorial(2 * j)
                / (math.factorial(half - j) * math.factorial(j) * math.factorial(j - 1)
                   * math.factorial(k - j) * math.factorial(2 * j - k))
            )
        out.append((-1) ** (k + half) * acc)
    return np.array(out, dtype=float)


_STEHFEST = _stehfest_weights(14)


def _phi_rule(panels: int = 64, order: int = 24):
    edges = np.linspace(0.0, math.pi, panels + 1)
    return _panel_rule(edges, order)


_PHI, _PHI_W = _phi_rule()


def _positive_stable_logpdf(x, k: float) -> np.ndarray:
    """Log density of the positive stable law with Laplace transform ``exp(-s^k)``.

    Zolotarev's single-integral form, ``0 < k < 1``, by composite
    Gauss-Legendre over the angle, accumulated in the log domain.
    """
    lx = np.log(np.asarray(x, dtype=float))[:, None]
    phi = _PHI
    r = 1.0 / (1.0 - k)
    la = r * (np.log(np.sin(k * phi)) - np.log(np.sin(phi))) + np.log(np.sin((1 - k) * phi)) - np.log(np.sin(k * phi))
    terms = la + np.log(_PHI_W) - np.exp(la - k * r * lx)
    return math.log(k * r / math.pi) - r * lx[:, 0] + logsumexp(terms, axis=1)


@dataclass(frozen=True)
class GgdPrior:
    """Generalized Gaussian with shape ``alpha`` and variance ``sigma2``."""

    alpha: float
    sigma2: float

    kind = "ggd"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def scale(self) -> float:
        """``sqrt(beta) * sigma`` with ``beta = Gamma(1/a) / Gamma(3/a)``."""
        a = self.alpha
        return math.sqrt(math.exp(gammaln(1 / a) - gammaln(3 / a)) * self.sigma2)

    @property
    def _log_norm(self) -> float:
        return math.log(self.alpha / (2 * self.scale)) - gammaln(1 / self.alpha)

    @property
    def is_gaussian(self) -> bool:
        return self.alpha == 2.0

    @property
    def _support(self) -> float:
        # |x| beyond which the density is below exp(-60) of its peak
        return self.scale * 60.0 ** (1 / self.alpha)

    def variance(self) -> float:
        return self.sigma2

    def _logpdf(self, x):
        return self._log_norm - (np.abs(x) / self.scale) ** self.alpha

    def pdf(self, x):
        return np.exp(self._logpdf(np.asarray(x, dtype=float)))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.gamma(1.0 / self.alpha, size=n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return sign * self.scale * u ** (1.0 / self.alpha)

    # -- posterior --------------------------------------------------------

    def _grid_edges(self, lo: float, hi: float, v: float) -> np.ndarray:
        sv = math.sqrt(v)
        s = self.scale
        geo = s * np.geomspace(1e-14, self._support / s, 90)
        y = 0.5 * (lo + hi)
        window = np.linspace(y - 12 * sv, y + 12 * sv, 41)
        e = np.concatenate([window, geo, -geo, [0.0, lo, hi]])
        return np.unique(e[(e >= lo) & (e <= hi)])

    def _moments_one(self, y: float, v: float, order: int):
        """Return ``(log Z, mean, var)`` of ``p(x) N(y; x, v)`` over x."""
        sv = math.sqrt(v)
        lo = max(-self._support, y - 12 * sv)
        hi = min(self._support, y + 12 * sv)
        if hi <= lo:
            # likelihood window lies beyond the prior support
            lo, hi = (self._support * 0.5, self._support) if y > 0 else (-self._support, -self._support * 0.5)
        x, w = _panel_rule(self._grid_edges(lo, hi, v), order)
        lg = self._logpdf(x) - 0.5 * (x - y) ** 2 / v
        top = lg.max()
        k = w * np.exp(lg - top)
        z = k.sum()
        mean = float(np.dot(k, x) / z)
        var = float(np.dot(k, (x - mean) ** 2) / z)
        log_z = top + math.log(z) - 0.5 * math.log(2 * math.pi * v)
        return log_z, mean, var

    def posterior(self, y, noise_var, order: int = 10):
        """Posterior mean and variance under ``y = x + N(0, noise_var)``.

        Returns ``(mean, variance, None)``; there is no discrete state.  Large
        inputs are evaluated on a graded grid of ``|y|`` and interpolated using
        the odd/even symmetry of the mean/variance.
        """
        _check_noise_var(noise_var)
        v = float(noise_var)
        y = np.asarray(y, dtype=float)
        if self.is_gaussian:
            g = self.sigma2 / (self.sigma2 + v)
            return g * y, np.full_like(y, g * v), None
        flat = y.ravel()
        if flat.size <= 256:
            res = np.array([self._moments_one(t, v, order)[1:] for t in flat]).reshape(-1, 2)
            return res[:, 0].reshape(y.shape), res[:, 1].reshape(y.shape), None
        ay = np.abs(flat)
        top = max(float(ay.max()), 1e-300)
        floor = min(1e-3 * math.sqrt(v), 1e-6 * self.scale, top)
        grid = np.concatenate([[0.0], np.geomspace(floor, top, 600)])
        tab = np.array([self._moments_one(t, v, order)[1:] for t in grid])
        mean = CubicSpline(grid, tab[:, 0])(ay) * np.sign(flat)
        var = np.maximum(CubicSpline(grid, tab[:, 1])(ay), 0.0)
        return mean.reshape(y.shape), var.reshape(y.shape), None

    # -- expected error ---------------------------------------------------

    def _mmse(self, v: float, order: int = 10) -> float:
        if self.is_gaussian:
            return self.sigma2 * v / (self.sigma2 + v)
        sv = math.sqrt(v)
        ymax = self._support + 12 * sv
        floor = min(1e-4 * sv, 1e-6 * self.scale)
        edges = np.concatenate([[0.0], np.geomspace(floor, ymax, 110)])
        ys, wy = _panel_rule(edges, order)
        acc = 0.0
        for yy, ww in zip(ys, wy):
            log_z, _, pv = self._moments_one(yy, v, order)
            acc += ww * math.exp(log_z) * pv
        return 2.0 * acc

    def scalar_mmse(self, noise_var: float, rtol: float = 1e-6) -> float:
        _check_noise_var(noise_var)
        coarse = self._mmse(noise_var, 10)
        fine = self._mmse(noise_var, 20)
        if abs(fine - coarse) > rtol * fine:
            raise QuadratureError(f"GGD mmse did not converge at noise_var={noise_var}")
        return fine

    def differential_entropy(self) -> float:
        a = self.alpha
        nats = 1.0 / a - self._log_norm
        return nats / math.log(2)

    def _mixing_weights(self, tau: np.ndarray, method: str) -> np.ndarray:
        """Unnormalised mixture mass per log-spaced atom ``tau``.

        With ``m = x^2/2`` and ``z = 1/tau`` the mixing density satisfies
        ``int exp(-m z) q(z) dz = c1 exp(-t m^(a/2))``, ``t = 2^(a/2)/c2``,
        where ``q(z) = sqrt(z / 2pi) p(1/z) / z^2``.  So ``q / c1`` is a
        positive stable density of index ``a/2``, evaluated either through its
        integral representation or by Gaver-Stehfest inversion.
        """
        a = self.alpha
        c1 = math.exp(self._log_norm)
        t = 2 ** (a / 2) / self.scale**a
        z = 1.0 / tau
        with np.errstate(all="ignore"):
            if method == "zolotarev":
                k = a / 2
                sc = t ** (1 / k)
                q = c1 * np.exp(_positive_stable_logpdf(z / sc, k)) / sc
            elif method == "stehfest":
                kk = np.arange(1, _STEHFEST.size + 1)
                s = np.outer(math.log(2) / z, kk)
                q = c1 * math.log(2) / z * (np.exp(-t * s ** (a / 2)) @ _STEHFEST)
            else:
                raise ValueError(f"unknown inversion method {method!r}")
            w = q * tau**-0.5 * math.sqrt(2 * math.pi) * math.log(tau[1] / tau[0])
        return np.clip(np.nan_to_num(w, nan=0.0, posinf=0.0, neginf=0.0), 0.0, None)

    def variance_mixture(self, grid_size: int = 500, method: str = "zolotarev") -> VarianceMixture:
        """Gaussian scale mixture on a log-spaced variance grid.

        The default evaluates the mixing law exactly and places the grid on
        its effective support (found by a coarse first pass); ``"stehfest"``
        uses a fixed-order numerical inverse Laplace transform on a fixed wide
        grid, which degrades as ``alpha`` approaches 2.
        """
        if self.is_gaussian:
            return VarianceMixture(np.array([self.sigma2]), np.array([1.0]))
        if not 0 < self.alpha < 2:
            raise ValueError("only 0 < alpha <= 2 admits a Gaussian scale mixture")
        if method == "stehfest":
            tau = np.geomspace(1e-30 * self.sigma2, 1e4 * self.sigma2, grid_size)
        else:
            coarse = np.geomspace(1e-200 * self.sigma2, 1e30 * self.sigma2, 8000)
            wc = self._mixing_weights(coarse, method)
            # the density at the origin weights atoms by tau^-1/2
            at0 = wc / np.sqrt(coarse)
            live = np.flatnonzero((wc > 1e-18 * wc.max()) | (at0 > 1e-12 * at0.max()))
            if live.size < 2:
                raise QuadratureError(f"mixing law unresolved at alpha={self.alpha}")
            lo, hi = coarse[max(live[0] - 1, 0)], coarse[min(live[-1] + 1, coarse.size - 1)]
            tau = np.geomspace(lo, hi, grid_size)
        w = self._mixing_weights(tau, method)
        w /= w.sum()
        keep = w > 0
        tau, w = tau[keep], w[keep]
        # match the second moment exactly; discretisation error is tiny
        tau = tau * self.sigma2 / float(np.dot(w, tau))
        return VarianceMixture(tau, w)

    def to_dict(self) -> dict:
        return {"kind": "ggd", "alpha": self.alpha, "sigma2": self.sigma2}


Prior = Union[GmdPrior, GgdPrior]


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def pdf(prior: Prior, x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("pdf argument must be finite")
    out = prior.pdf(x)
    return float(out) if out.ndim == 0 else out


def variance(prior: Prior) -> float:
    return prior.variance()


def sample(prior: Prior, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. values; ``seed`` may be an int or a ``Generator``."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return prior.sample(int(n), rng)


def mmse_denoise(prior: Prior, y, noise_var: float):
    """Scalar MMSE estimate of x from ``y = x + N(0, noise_var)``.

    Returns ``(xhat, state_posterior)`` where ``state_posterior`` is the
    probability of the large-variance state for a GMD and ``None`` for a GGD.
    """
    mean, _, p1 = prior.posterior(y, noise_var)
    if np.ndim(mean) == 0:
        mean = float(mean)
        p1 = None if p1 is None else float(p1)
    return mean, p1


def scalar_mmse(prior: Prior, noise_var: float) -> float:
    """``E[(F(x + sqrt(v) z; v) - x)^2]`` with F the posterior mean."""
    return prior.scalar_mmse(noise_var)


def differential_entropy(prior: Prior) -> float:
    return prior.differential_entropy()


def ggd_variance_mixture(prior: GgdPrior, grid_size: int = 500, method: str = "zolotarev") -> VarianceMixture:
    return prior.variance_mixture(grid_size, method)


def gmd_variance_mixture(prior: GmdPrior) -> VarianceMixture:
    return prior.variance_mixture()


def variance_mixture(prior: Prior) -> VarianceMixture:
    return prior.variance_mixture()


def prior_from_dict(d: dict) -> Prior:
    kind = d.get("kind")
    if kind == "gmd":
        return GmdPrior(float(d["lambda"]), float(d["sigma_L2"]), float(d["sigma_S2"]))
    if kind == "ggd":
        return GgdPrior(float(d["alpha"]), float(d["sigma2"]))
    if kind == "gaussian":
        return gaussian(float(d["sigma2"]))
    raise ValueError(f"unknown prior kind {kind!r}")


def prior_to_dict(prior: Prior) -> dict:
    return prior.to_dict()
