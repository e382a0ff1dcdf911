"""Block-diagonal bandwise encoder and the matching decoders.

Each band is sampled independently by an identity block (full sampling), an
all-zero block (no samples) or a dense Gaussian block whose trailing columns
may be zeroed so that the sensed part is sampled at the band's critical ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .priors import Prior, gmd_posterior


class DivergenceError(RuntimeError):
    """AMP's error estimate blew up relative to the signal energy."""


@dataclass
class BandEncoder:
    kind: str  # "identity" | "gaussian" | "zero"
    n: int
    m: int
    sensed: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind == "identity":
            self.m = self.sensed = self.n
        elif self.kind == "zero":
            self.m = self.sensed = 0
        elif self.kind == "gaussian":
            if not 1 <= self.m <= self.sensed <= self.n:
                raise ValueError(f"need 1 <= m <= sensed <= n, got {self.m}, {self.sensed}, {self.n}")
            if self.seed is None:
                raise ValueError("gaussian blocks need a seed")
        else:
            raise ValueError(f"unknown block kind {self.kind!r}")

    def matrix(self) -> np.ndarray:
        """Dense ``m x sensed`` block with i.i.d. ``N(0, 1/m)`` entries."""
        if self.kind != "gaussian":
            raise ValueError("only gaussian blocks carry a matrix")
        rng = np.random.default_rng(self.seed)
        return rng.standard_normal((self.m, self.sensed)) / math.sqrt(self.m)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "m": self.m, "sensed": self.sensed, "seed": self.seed}


@dataclass
class EncoderSpec:
    bands: list[BandEncoder]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def matrix(self, i: int) -> np.ndarray:
        if i not in self._cache:
            self._cache[i] = self.bands[i].matrix()
        return self._cache[i]

    def release(self):
        self._cache.clear()

    @property
    def measurements(self) -> int:
        return sum(b.m for b in self.bands)

    def to_dict(self) -> dict:
        return {"bands": [b.to_dict() for b in self.bands]}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderSpec":
        return cls([BandEncoder(**b) for b in d["bands"]])


def _band_seed(seed: int, band: int) -> int:
    return int(np.random.SeedSequence([int(seed), band]).generate_state(1)[0])


def band_encoder(n: int, m: int, seed: int, delta_c: Optional[float] = None) -> BandEncoder:
    """Encoder block for ``m`` samples of an ``n``-coefficient band.

    Below ``delta_c`` only ``round(m / delta_c)`` leading coefficients are
    sensed and the rest are left to the trivial zero estimate.
    """
    if not 0 <= m <= n:
        raise ValueError(f"invalid sample count {m} for band of size {n}")
    if m == n:
        return BandEncoder("identity", n, n)
    if m == 0:
        return BandEncoder("zero", n, 0)
    sensed = n
    if delta_c and m / n < delta_c:
        sensed = min(n, max(m, int(round(m / delta_c))))
    return BandEncoder("gaussian", n, m, sensed, seed)


def build_block_encoder(allocation, model=None, delta_c: Optional[Sequence[Optional[float]]] = None, seed: int = 0) -> EncoderSpec:
    """Block-diagonal encoder for an allocation, with zeroing below ``delta_c``."""
    sizes = allocation.band_sizes or (model.sizes if model is not None else None)
    if sizes is None:
        raise ValueError("band sizes unknown: pass a model or a sized allocation")
    if model is not None and list(sizes) != model.sizes:
        raise ValueError("allocation does not match the band model")
    if len(allocation.m) != len(sizes):
        raise ValueError("allocation length does not match band count")
    dcs = list(delta_c) if delta_c is not None else [None] * len(sizes)
    blocks = [band_encoder(n, m, _band_seed(seed, i), dc) for i, (n, m, dc) in enumerate(zip(sizes, allocation.m, dcs))]
    return EncoderSpec(blocks)


def gaussian_spec(n: int, m: int, seed: int) -> EncoderSpec:
    """Single-band dense Gaussian encoder (no zeroing)."""
    return EncoderSpec([band_encoder(n, m, seed)])


def encode(spec: EncoderSpec, theta: Sequence[np.ndarray]) -> list[np.ndarray]:
    if len(theta) != len(spec.bands):
        raise ValueError("band count mismatch")
    out = []
    for i, (b, x) in enumerate(zip(spec.bands, theta)):
        x = np.asarray(x, dtype=float)
        if x.size != b.n:
            raise ValueError(f"band {i}: expected {b.n} coefficients, got {x.size}")
        if b.kind == "identity":
            out.append(x.copy())
        elif b.kind == "zero":
            out.append(np.zeros(0))
        else:
            out.append(spec.matrix(i) @ x[:b.sensed])
    return out


# ---------------------------------------------------------------------------
# AMP
# ---------------------------------------------------------------------------

@dataclass
class AmpResult:
    x: np.ndarray
    pseudo: np.ndarray  # x + A^T r at the last iteration
    noise_var: float  # effective noise variance at the last iteration
    mse_track: np.ndarray  # mean posterior variance per iteration
    noise_track: np.ndarray
    iterations: int


Denoiser = Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray]]


def amp(y, A, denoise: Denoiser, max_iter: int = 500, tol: float = 1e-6, damping: float = 1.0,
        patience: Optional[int] = 10, callback=None) -> AmpResult:
    """Onsager-corrected AMP for ``y = A x``.

    ``denoise(u, v)`` returns the posterior mean and variance of ``x`` given
    ``u = x + N(0, v)``; its average derivative is taken as ``mean(var) / v``.

    In the noiseless setting the Onsager coefficient tends to one at the fixed
    point, and at finite size the iteration slowly drifts away after reaching
    it.  The estimate with the smallest effective noise ``|r|^2/m`` is kept,
    and the run stops once that has not improved for ``patience`` iterations
    (``None`` disables the guard).  ``callback(t, x)`` is called after every
    iteration.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    m, k = A.shape
    y = np.asarray(y, dtype=float)
    x = np.zeros(k)
    r = y.copy()
    energy = max(float(r @ r) / k, 1e-300)
    mse_track, noise_track = [], []
    best = (x, x.copy(), float(r @ r) / m)
    since_best = 0
    it = 0
    for it in range(1, max_iter + 1):
        v = float(r @ r) / m
        if v <= 1e-300:
            best = (x, x.copy(), 0.0)
            break
        pseudo = x + A.T @ r
        x_new, post_var = denoise(pseudo, v)
        if damping < 1:
            x_new = damping * x_new + (1 - damping) * x
        onsager = float(np.sum(post_var)) / (m * v)
        r = y - A @ x_new + onsager * r
        mse = float(np.mean(post_var))
        mse_track.append(mse)
        noise_track.append(v)
        if it == 1:
            # |y|^2/k is a poor energy estimate for tiny m; the first
            # prediction is bounded by the prior variance instead
            energy = max(energy, mse)
        if not math.isfinite(mse) or mse > 10 * energy or v * m / k > 10 * energy:
            raise DivergenceError(f"AMP diverged at iteration {it}")
        if v < best[2] or it == 1:
            best, since_best = (x_new, pseudo, v), 0
        else:
            since_best += 1
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x_new), 1e-300)
        x = x_new
        if callback is not None:
            callback(it, x)
        if change < tol or (patience is not None and since_best >= patience):
            break
    x_best, pseudo_best, v_best = best
    return AmpResult(x_best, pseudo_best, v_best, np.array(mse_track), np.array(noise_track), it)


def _prior_denoiser(prior: Prior) -> Denoiser:
    def f(u, v):
        mean, var, _ = prior.posterior(u, v)
        return mean, var
    return f


def _gmd_denoiser(lam, sigma_l2, sigma_s2) -> Denoiser:
    def f(u, v):
        mean, var, _ = gmd_posterior(u, v, lam, sigma_l2, sigma_s2)
        return mean, var
    return f


def _min_norm(A, y) -> np.ndarray:
    return A.T @ cho_solve(cho_factor(A @ A.T), y)


def gaussian_posterior_mean(y, A, variance: float) -> AmpResult:
    """Exact posterior mean under an i.i.d. Gaussian prior.

    Noiseless, this is the minimum-norm solution, which is also where AMP
    converges; solving directly avoids AMP's instability on tiny blocks.
    """
    m, k = A.shape
    x = _min_norm(A, np.asarray(y, dtype=float))
    mse = variance * (k - m) / k
    return AmpResult(x, x.copy(), 0.0, np.array([mse]), np.array([0.0]), 0)


def bamp_band(y, spec: EncoderSpec, i: int, prior: Prior, **kw):
    """Decode one band; returns ``(estimate, AmpResult or None)``."""
    b = spec.bands[i]
    if b.kind == "identity":
        return np.asarray(y, dtype=float).copy(), None
    if b.kind == "zero":
        return np.zeros(b.n), None
    if getattr(prior, "is_gaussian", False):
        res = gaussian_posterior_mean(y, spec.matrix(i), prior.variance())
    else:
        res = amp(y, spec.matrix(i), _prior_denoiser(prior), **kw)
    out = np.zeros(b.n)
    out[:b.sensed] = res.x
    return out, res


def bamp_decode(y, spec: EncoderSpec, priors: Sequence[Prior], max_iter: int = 500, tol: float = 1e-6, damping: float = 1.0):
    """Bandwise Bayes-optimal AMP.

    Returns ``(theta_hat, tracks)`` where ``tracks[i]`` is the per-iteration
    predicted MSE of band ``i`` (empty for identity and zero blocks).
    """
    if len(priors) != len(spec.bands):
        raise ValueError("need one prior per band")
    theta, tracks = [], []
    for i, prior in enumerate(priors):
        est, res = bamp_band(y[i], spec, i, prior, max_iter=max_iter, tol=tol, damping=damping)
        theta.append(est)
        tracks.append(res.mse_track if res is not None else np.zeros(0))
    return theta, tracks


def _normalize_pairs(l1, l0):
    s = l1 + l0
    return np.stack([l1 / s, l0 / s], axis=-1)


def state_likelihoods(u, v: float, sigma_l2: float, sigma_s2: float) -> np.ndarray:
    """``(p(u | s=1), p(u | s=0))`` for ``u = x + N(0, v)``, rescaled to sum 1."""
    u = np.asarray(u, dtype=float)
    vl, vs = sigma_l2 + v, sigma_s2 + v
    a1 = -0.5 * np.log(vl) - 0.5 * u * u / vl
    a0 = -0.5 * np.log(vs) - 0.5 * u * u / vs
    top = np.maximum(a1, a0)
    return _normalize_pairs(np.exp(a1 - top), np.exp(a0 - top))


def bamp_decode_soft(y, spec: EncoderSpec, band_variances, lambdas, max_iter: int = 500, tol: float = 1e-6, damping: float = 1.0):
    """BAMP with per-coefficient activity rates.

    ``band_variances[i] = (sigma_L2, sigma_S2)``; ``lambdas[i]`` holds one
    activity rate per coefficient of band ``i``.  Returns ``(theta_hat,
    likelihoods)`` where ``likelihoods[i]`` is an ``(n_i, 2)`` array of state
    likelihoods at the final effective noise level (uniform where a
    coefficient was not observed).
    """
    theta, likes = [], []
    for i, b in enumerate(spec.bands):
        sl, ss = band_variances[i]
        lam = np.broadcast_to(np.asarray(lambdas[i], dtype=float), (b.n,))
        if b.kind == "identity":
            est = np.asarray(y[i], dtype=float).copy()
            like = state_likelihoods(est, 0.0, sl, ss) if ss > 0 else _point_mass_likelihood(est)
        elif b.kind == "zero":
            est = np.zeros(b.n)
            like = np.full((b.n, 2), 0.5)
        else:
            if sl == ss:
                res = gaussian_posterior_mean(y[i], spec.matrix(i), sl)
            else:
                res = amp(y[i], spec.matrix(i), _gmd_denoiser(lam[:b.sensed], sl, ss),
                          max_iter=max_iter, tol=tol, damping=damping)
            est = np.zeros(b.n)
            est[:b.sensed] = res.x
            like = np.full((b.n, 2), 0.5)
            like[:b.sensed] = state_likelihoods(res.pseudo, res.noise_var, sl, ss)
        theta.append(est)
        likes.append(like)
    return theta, likes


def _point_mass_likelihood(x):
    l1 = np.where(x == 0, 0.0, 1.0)
    return np.stack([l1, 1.0 - l1], axis=-1)


def l2_decode(y, spec: EncoderSpec) -> list[np.ndarray]:
    """Minimum-norm least-squares estimate per band."""
    out = []
    for i, b in enumerate(spec.bands):
        if b.kind == "identity":
            out.append(np.asarray(y[i], dtype=float).copy())
        elif b.kind == "zero":
            out.append(np.zeros(b.n))
        else:
            est = np.zeros(b.n)
            est[:b.sensed] = _min_norm(spec.matrix(i), np.asarray(y[i], dtype=float))
            out.append(est)
    return out
