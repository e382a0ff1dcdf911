"""Hidden-Markov-tree model over wavelet activity states and turbo decoding.

Each detail coefficient carries a binary state (1 = large-variance
component).  States persist across scale along the quad-tree; the turbo loop
alternates bandwise soft-input BAMP with exact sum-product on the trees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .codec import EncoderSpec, bamp_decode_soft, state_likelihoods
from .priors import GmdPrior
from .wavelet import QuadTree, quad_tree_index


def _as_probs(value, count: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (count,)).copy()
    if np.any(~np.isfinite(arr)) or np.any((arr < 0) | (arr > 1)):
        raise ValueError(f"{name} must be probabilities in [0, 1]")
    return arr


@dataclass(frozen=True)
class HmtParams:
    """Root activity and scale transitions.

    ``p11``/``p10`` are ``p(s_child = 1 | s_parent = 1 / 0)``; each may be a
    scalar or one value per transition (scale 2 onwards).
    """

    root_lambda: float
    p11: float | tuple = 0.9
    p10: float | tuple = 0.1

    def __post_init__(self):
        _as_probs(self.root_lambda, 1, "root_lambda")
        for name in ("p11", "p10"):
            val = getattr(self, name)
            if np.ndim(val):
                object.__setattr__(self, name, tuple(float(v) for v in val))
            _as_probs(getattr(self, name), np.size(val), name)

    def transitions(self, scales: int) -> tuple[np.ndarray, np.ndarray]:
        """``(p11, p10)`` for transitions into scales ``2..scales``."""
        k = max(scales - 1, 0)
        for name in ("p11", "p10"):
            if np.ndim(getattr(self, name)) and np.size(getattr(self, name)) != k:
                raise ValueError(f"{name} needs {k} per-scale values")
        return _as_probs(self.p11, k, "p11"), _as_probs(self.p10, k, "p10")

    def to_dict(self) -> dict:
        conv = lambda v: list(v) if isinstance(v, tuple) else v
        return {"root_lambda": self.root_lambda, "p11": conv(self.p11), "p10": conv(self.p10)}

    @classmethod
    def from_dict(cls, d: dict) -> "HmtParams":
        return cls(d["root_lambda"], d.get("p11", 0.9), d.get("p10", 0.1))

    @classmethod
    def uninformative(cls, lambdas: Sequence[float]) -> "HmtParams":
        """Transitions that make every scale independent of its parent."""
        rest = tuple(float(v) for v in lambdas[1:])
        return cls(float(lambdas[0]), rest, rest)


def marginal_activity(params: HmtParams, scales: int) -> np.ndarray:
    """Per-scale marginal activity, coarsest scale first."""
    if scales < 1:
        raise ValueError("need at least one scale")
    p11, p10 = params.transitions(scales)
    lam = np.empty(scales)
    lam[0] = params.root_lambda
    for j in range(1, scales):
        lam[j] = p11[j - 1] * lam[j - 1] + p10[j - 1] * (1 - lam[j - 1])
    return lam


def hmt_sample(params: HmtParams, tree: QuadTree, band_variances, seed=None):
    """Ancestral sample of states and coefficients.

    ``band_variances[j-1] = (sigma_L2, sigma_S2)`` for detail scale ``j``.
    Returns ``(states, coefficients)`` in node order.
    """
    if len(band_variances) != tree.levels:
        raise ValueError("need one variance pair per detail scale")
    rng = np.random.default_rng(seed)
    p11, p10 = params.transitions(tree.levels)
    states = np.zeros(tree.size, dtype=np.int8)
    coeffs = np.empty(tree.size)
    for j in range(1, tree.levels + 1):
        sl = tree.band_slice(j)
        count = sl.stop - sl.start
        if j == 1:
            p = np.full(count, params.root_lambda)
        else:
            par = states[tree.parent[sl]]
            p = np.where(par == 1, p11[j - 2], p10[j - 2])
        states[sl] = rng.random(count) < p
        vl, vs = band_variances[j - 1]
        std = np.where(states[sl] == 1, math.sqrt(vl), math.sqrt(vs))
        coeffs[sl] = std * rng.standard_normal(count)
    return states, coeffs


@dataclass
class StateBeliefs:
    """Per-node evidence and beliefs; column 0 is state 1, column 1 state 0."""

    likelihoods: np.ndarray  # (N, 2)
    posterior: Optional[np.ndarray] = None  # p(s=1 | all evidence in the tree)
    extrinsic: Optional[np.ndarray] = None  # same, excluding the node's own evidence


def _normalize(a: np.ndarray) -> np.ndarray:
    return a / a.sum(axis=-1, keepdims=True)


def _check_likelihoods(likelihoods, size: int) -> np.ndarray:
    L = np.asarray(likelihoods, dtype=float)
    if L.shape != (size, 2):
        raise ValueError(f"expected likelihoods of shape ({size}, 2), got {L.shape}")
    if not np.all(np.isfinite(L)) or np.any(L < 0):
        raise ValueError("likelihoods must be finite and nonnegative")
    if np.any(L.sum(axis=1) == 0):
        raise ValueError("a node has zero likelihood under both states")
    return _normalize(L)


def _transition(p11: float, p10: float) -> np.ndarray:
    # rows: parent state (1, 0); columns: child state (1, 0)
    return np.array([[p11, 1 - p11], [p10, 1 - p10]])


def hmt_posterior(likelihoods, params: HmtParams, tree: QuadTree) -> StateBeliefs:
    """Exact upward-downward sum-product over every tree in the forest."""
    L = _check_likelihoods(likelihoods, tree.size)
    levels = tree.levels
    p11, p10 = params.transitions(levels)
    beta = np.empty_like(L)  # evidence at and below a node
    up = np.empty_like(L)  # child-to-parent message, indexed by child, over parent states
    below = np.ones_like(L)  # product of child messages
    for j in range(levels, 0, -1):
        sl = tree.band_slice(j)
        if j < levels:
            ch = tree.children[sl]
            below[sl] = _normalize(np.prod(up[ch], axis=1))
        beta[sl] = _normalize(L[sl] * below[sl])
        if j > 1:
            up[sl] = _normalize(beta[sl] @ _transition(p11[j - 2], p10[j - 2]).T)

    alpha = np.empty_like(L)  # prior message from everything above
    alpha[tree.band_slice(1)] = [params.root_lambda, 1 - params.root_lambda]
    for j in range(1, levels):
        sl = tree.band_slice(j)
        ch = tree.children[sl]
        msgs = up[ch]  # (P, 4, 2)
        # product over the other three children, via prefix/suffix products
        pre = np.ones_like(msgs)
        suf = np.ones_like(msgs)
        for c in range(1, 4):
            pre[:, c] = pre[:, c - 1] * msgs[:, c - 1]
            suf[:, 3 - c] = suf[:, 4 - c] * msgs[:, 4 - c]
        outside = alpha[sl][:, None, :] * L[sl][:, None, :] * pre * suf
        outside = outside / outside.sum(axis=-1, keepdims=True)
        child_prior = outside @ _transition(p11[j - 1], p10[j - 1])
        alpha[ch.ravel()] = _normalize(child_prior.reshape(-1, 2))

    extrinsic = _normalize(alpha * below)
    posterior = _normalize(alpha * below * L)
    return StateBeliefs(L, posterior[:, 0], extrinsic[:, 0])


def soft_information(omega, sigma_l2: float, sigma_s2: float):
    """Activity estimate from the ratio of the component densities at ``omega``."""
    if not sigma_l2 > sigma_s2 > 0:
        raise ValueError("need sigma_l2 > sigma_s2 > 0")
    out = state_likelihoods(omega, 0.0, sigma_l2, sigma_s2)[..., 0]
    return float(out) if out.ndim == 0 else out


def default_hmt_params(priors: Sequence[GmdPrior], p11: float = 0.9, p10: float = 0.1) -> HmtParams:
    """Root activity from the coarsest detail band's prior; fixed transitions."""
    return HmtParams(float(priors[1].lam), p11, p10)


def _square_tree(sizes: Sequence[int]) -> QuadTree:
    levels = len(sizes) - 1
    side = math.isqrt(sizes[0])
    if side * side != sizes[0]:
        raise ValueError("cannot infer a square geometry; pass the tree explicitly")
    return quad_tree_index((side << levels, side << levels), levels)


@dataclass
class TurboTrace:
    iterations: list
    posteriors: list


def turbo_decode(
    y,
    spec: EncoderSpec,
    priors: Sequence[GmdPrior],
    hmt_params: HmtParams,
    turbo_iters: int = 20,
    tree: Optional[QuadTree] = None,
    callback: Optional[Callable[[int, list], None]] = None,
    **bamp_kw,
):
    """Alternate soft-input BAMP with HMT inference.

    ``priors[0]`` is the scaling band, ``priors[1:]`` the detail scales.  BAMP
    is initialised with each band's own activity rate; afterwards it receives
    the tree's extrinsic activity (the belief excluding the coefficient's own
    evidence).  ``callback(t, theta)`` sees each iteration's estimate.  Returns
    ``(theta_hat, trace)``.
    """
    if turbo_iters < 1:
        raise ValueError("turbo_iters must be at least 1")
    sizes = [b.n for b in spec.bands]
    if len(priors) != len(sizes):
        raise ValueError("need one prior per band")
    tree = tree or _square_tree(sizes)
    if tree.size != sum(sizes[1:]):
        raise ValueError("quad-tree does not match the band sizes")
    variances = [(p.sigma_l2, p.sigma_s2) for p in priors]
    lambdas = [np.full(n, p.lam) for n, p in zip(sizes, priors)]
    trace = TurboTrace([], [])
    theta = None
    for t in range(1, turbo_iters + 1):
        theta, likes = bamp_decode_soft(y, spec, variances, lambdas, **bamp_kw)
        if callback is not None:
            callback(t, theta)
        trace.iterations.append(t)
        if t == turbo_iters:
            break
        beliefs = hmt_posterior(np.concatenate(likes[1:]), hmt_params, tree)
        trace.posteriors.append(beliefs.posterior)
        for j in range(1, len(sizes)):
            lambdas[j] = beliefs.extrinsic[tree.band_slice(j)]
    return theta, trace
