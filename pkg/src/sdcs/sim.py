"""Monte Carlo harness: empirical SD points, the end-to-end image pipeline and
the empirical sample-reallocation search."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .allocate import (
    Allocation,
    BandModel,
    greedy_allocate,
    mse_to_psnr,
    predicted_distortion,
    two_gender_allocate,
    uniform_allocate,
)
from .codec import (
    EncoderSpec,
    bamp_decode,
    bamp_decode_soft,
    band_encoder,
    build_block_encoder,
    encode,
    l2_decode,
)
from .priors import GmdPrior, Prior, gaussian, prior_to_dict
from .sd import convexify, sd_curve
from .turbo import HmtParams, default_hmt_params, hmt_sample, soft_information, turbo_decode
from .wavelet import (
    band_sizes,
    band_unvectorize,
    band_vectorize,
    dwt2,
    estimate_ggd,
    estimate_gmd,
    idwt2,
    quad_tree_index,
)

DECODERS = ("bamp", "bamp_soft_oracle", "bamp_genie", "l2")


def psnr(reference, estimate, max_db: float = 100.0) -> float:
    """Unit-peak PSNR ``-10 log10(mean squared error)``, capped at ``max_db``."""
    a, b = np.asarray(reference, dtype=float), np.asarray(estimate, dtype=float)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return mse_to_psnr(float(np.mean((a - b) ** 2)), max_db)


# ---------------------------------------------------------------------------
# Empirical SD
# ---------------------------------------------------------------------------

def _draw_gmd(prior: GmdPrior, n: int, rng):
    states = rng.random(n) < prior.lam
    std = np.where(states, math.sqrt(prior.sigma_l2), math.sqrt(prior.sigma_s2))
    return states, std * rng.standard_normal(n)


def _trial(prior: Prior, delta: float, n: int, decoder: str, seq: np.random.SeedSequence) -> float:
    src_seed, mat_seed = seq.spawn(2)
    rng = np.random.default_rng(src_seed)
    # GMD sources always carry their states, so decoders given the same seed
    # see the same data and matrix (paired comparisons)
    if isinstance(prior, GmdPrior):
        states, x = _draw_gmd(prior, n, rng)
    else:
        x = prior.sample(n, rng)
    m = int(round(delta * n))
    spec = EncoderSpec([band_encoder(n, m, int(mat_seed.generate_state(1)[0]))])
    y = encode(spec, [x])
    if decoder == "bamp":
        xh = bamp_decode(y, spec, [prior])[0][0]
    elif decoder == "l2":
        xh = l2_decode(y, spec)[0]
    else:
        if prior.is_gaussian:
            lam = np.ones(n)
        elif decoder == "bamp_genie":
            lam = states.astype(float)
        else:
            lam = soft_information(x, prior.sigma_l2, prior.sigma_s2)
        xh = bamp_decode_soft(y, spec, [(prior.sigma_l2, prior.sigma_s2)], [lam])[0][0]
    return float(np.mean((xh - x) ** 2))


def monte_carlo_sd(prior: Prior, delta: float, n: int, trials: int, decoder: str = "bamp", seed: int = 0,
                   threads: int = 1, return_samples: bool = False):
    """Mean per-component MSE over ``trials`` fresh sources and matrices.

    ``bamp_soft_oracle`` feeds BAMP the per-coefficient activity computed from
    the true coefficients; ``bamp_genie`` feeds it the true states.  Returns
    ``(mean, standard error)`` (plus the per-trial values on request).
    """
    if decoder not in DECODERS:
        raise ValueError(f"decoder must be one of {DECODERS}")
    if n < 1000 or trials < 1:
        raise ValueError("need n >= 1000 and at least one trial")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if decoder in ("bamp_soft_oracle", "bamp_genie") and not isinstance(prior, GmdPrior):
        raise ValueError("oracle activity needs a GMD prior")
    seqs = np.random.SeedSequence(seed).spawn(trials)
    job = lambda s: _trial(prior, delta, n, decoder, s)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            errs = np.array(list(pool.map(job, seqs)))
    else:
        errs = np.array([job(s) for s in seqs])
    mean = float(np.mean(errs))
    stderr = float(np.std(errs, ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    return (mean, stderr, errs) if return_samples else (mean, stderr)


# ---------------------------------------------------------------------------
# Synthetic images
# ---------------------------------------------------------------------------

def synthetic_image(priors: Sequence[Prior], shape=(128, 128), levels: int = 5, seed=None) -> np.ndarray:
    """Image whose bands are i.i.d. draws from ``priors`` (scaling band first)."""
    sizes = band_sizes(shape, levels)
    if len(priors) != len(sizes):
        raise ValueError("need one prior per band")
    rng = np.random.default_rng(seed)
    bands = [p.sample(n, rng) for p, n in zip(priors, sizes)]
    return idwt2(band_unvectorize(bands, shape, levels))


def synthetic_hmt_image(priors: Sequence[GmdPrior], params: HmtParams, shape=(64, 64), levels: int = 5, seed=None):
    """Image with tree-structured detail states; returns ``(image, states)``."""
    sizes = band_sizes(shape, levels)
    if len(priors) != len(sizes):
        raise ValueError("need one prior per band")
    tree = quad_tree_index(shape, levels)
    root, child = np.random.SeedSequence(seed).spawn(2)
    states, det = hmt_sample(params, tree, [(p.sigma_l2, p.sigma_s2) for p in priors[1:]], child)
    scaling = priors[0].sample(sizes[0], np.random.default_rng(root))
    bands = [scaling] + [det[tree.band_slice(j)] for j in range(1, levels + 1)]
    return idwt2(band_unvectorize(bands, shape, levels)), states


# ---------------------------------------------------------------------------
# Image pipeline
# ---------------------------------------------------------------------------

def estimate_priors(bands, kind: str = "gmd") -> list[Prior]:
    """Scaling band as Gaussian (mean square), detail bands fitted per band."""
    if kind not in ("gmd", "ggd"):
        raise ValueError("kind must be 'gmd' or 'ggd'")
    fit = estimate_gmd if kind == "gmd" else estimate_ggd
    return [gaussian(float(np.mean(bands[0] ** 2)))] + [fit(b) for b in bands[1:]]


def _allocate(kind: str, model: BandModel, budget: int, curves, allocation: Optional[Allocation]):
    if kind == "greedy":
        return greedy_allocate(model, budget, curves)
    if kind == "uniform":
        return uniform_allocate(model, budget)
    if kind == "two_gender":
        return two_gender_allocate(model, budget)
    if kind == "explicit":
        if allocation is None:
            raise ValueError("explicit allocation requested but none given")
        alloc = Allocation(allocation.m, model.sizes)
        if alloc.budget != budget:
            raise ValueError("explicit allocation does not match the budget")
        return alloc
    raise ValueError(f"unknown allocator {kind!r}")


def image_pipeline(
    image,
    delta: float,
    model_source: str = "oracle",
    allocator: str = "greedy",
    decoder: str = "bamp",
    seed: int = 0,
    levels: int = 5,
    priors: Optional[Sequence[Prior]] = None,
    prior_kind: str = "gmd",
    allocation: Optional[Allocation] = None,
    hmt_params: Optional[HmtParams] = None,
    turbo_iters: int = 20,
    grid_step: float = 0.005,
    max_db: float = 100.0,
):
    """Transform, model, allocate, sense, decode and invert one image.

    ``model_source`` is ``"oracle"`` (fit the image's own bands) or
    ``"fixed"`` (use ``priors``).  Returns ``(reconstruction, psnr, report)``.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    bands = band_vectorize(dwt2(img, levels))
    if model_source == "oracle":
        priors = estimate_priors(bands, prior_kind)
    elif model_source == "fixed":
        if priors is None or len(priors) != len(bands):
            raise ValueError("fixed statistics need one prior per band")
        priors = list(priors)
    else:
        raise ValueError(f"unknown model source {model_source!r}")
    model = BandModel.from_priors([b.size for b in bands], priors)
    raw = [sd_curve(p, grid_step) for p in priors]
    hulls = [convexify(c) for c in raw]
    curves = [h[0] for h in hulls]
    delta_c = [h[1] for h in hulls]
    budget = int(round(delta * model.total))
    alloc = _allocate(allocator, model, budget, curves, allocation)
    spec = build_block_encoder(alloc, model, delta_c, seed)
    y = encode(spec, bands)
    report = {}
    if decoder == "l2":
        est = l2_decode(y, spec)
    elif decoder == "bamp":
        est = bamp_decode(y, spec, priors)[0]
    elif decoder == "turbo":
        if not all(isinstance(p, GmdPrior) for p in priors):
            raise ValueError("turbo decoding needs GMD band priors")
        hmt_params = hmt_params or default_hmt_params(priors)
        tree = quad_tree_index(img.shape, levels)
        trace = []

        def track(t, theta):
            err = float(np.mean((idwt2(band_unvectorize(theta, img.shape, levels)) - img) ** 2))
            trace.append({"iteration": t, "mse": err, "psnr": mse_to_psnr(err, max_db)})

        est = turbo_decode(y, spec, priors, hmt_params, turbo_iters, tree=tree, callback=track)[0]
        report["hmt"] = hmt_params.to_dict()
        report["turbo_iters"] = turbo_iters
        report["turbo_trace"] = trace
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    spec.release()
    recon = idwt2(band_unvectorize(est, img.shape, levels))
    achieved = psnr(img, recon, max_db)
    pred_mse, pred_psnr = predicted_distortion(model, alloc, curves, max_db)
    report.update({
        "version": __version__,
        "shape": list(img.shape),
        "levels": levels,
        "delta": delta,
        "budget": budget,
        "measurements": spec.measurements,
        "seed": seed,
        "model_source": model_source,
        "prior_kind": prior_kind if model_source == "oracle" else None,
        "allocator": allocator,
        "decoder": decoder,
        "grid_step": grid_step,
        "priors": [prior_to_dict(p) for p in priors],
        "delta_c": delta_c,
        "allocation": alloc.to_dict(),
        "encoder": spec.to_dict(),
        "psnr": achieved,
        "mse": float(np.mean((img - recon) ** 2)),
        "predicted_psnr": pred_psnr,
        "predicted_mse": pred_mse,
        "psnr_convention": "unit peak: -10 log10(mean squared error)",
    })
    return recon, achieved, report


def esa_search(image, base_allocation: Allocation, from_band: int, to_band: int, step: int = 100,
               decoder: str = "turbo", seed: int = 0, **pipeline_kw):
    """Hill-climb by moving ``step`` samples from one band to another.

    Stops at the first move that does not raise the PSNR.  Returns the best
    allocation and the PSNR of every accepted allocation (base first).
    """
    if from_band == to_band:
        raise ValueError("source and target bands must differ")
    if step < 1:
        raise ValueError("step must be positive")
    sizes = base_allocation.band_sizes
    if sizes is None:
        raise ValueError("base allocation must carry band sizes")
    delta = base_allocation.budget / sum(sizes)

    def score(alloc):
        return image_pipeline(image, delta, allocator="explicit", allocation=alloc, decoder=decoder,
                              seed=seed, **pipeline_kw)[1]

    best = base_allocation
    trace = [score(best)]
    while best.m[from_band] >= step and best.m[to_band] + step <= sizes[to_band]:
        m = list(best.m)
        m[from_band] -= step
        m[to_band] += step
        cand = Allocation(m, sizes)
        value = score(cand)
        if value <= trace[-1]:
            break
        best = cand
        trace.append(value)
    return best, trace
