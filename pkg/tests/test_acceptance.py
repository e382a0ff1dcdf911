"""Acceptance gate: one test (or group of tests) per numbered criterion.

Run ``pytest tests/test_acceptance.py`` to get a pass/fail line per criterion
in the terminal summary.
"""
import time

import numpy as np
import pytest
from scipy.stats import binomtest

from sdcs import sd
from sdcs.allocate import BandModel, band_objective, brute_force_allocate, greedy_allocate
from sdcs.presets import average_gmd, cameraman_gmd, ggd_anchor, gmd_anchor
from sdcs.priors import GmdPrior, gaussian
from sdcs.sim import image_pipeline, monte_carlo_sd, synthetic_hmt_image, synthetic_image
from sdcs.turbo import HmtParams, hmt_posterior, marginal_activity
from sdcs.wavelet import band_sizes, band_vectorize, dwt2, estimate_ggd, estimate_gmd, idwt2, quad_tree_index

from oracles import brute_force_marginals, subtree

criterion = pytest.mark.criterion


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@criterion(1, "Gaussian state evolution equals 1 - delta")
def test_gaussian_se_oracle():
    t0 = time.perf_counter()
    for delta in np.round(np.arange(0.1, 1.0, 0.1), 1):
        assert sd.state_evolution_fixed_point(gaussian(1.0), delta) == pytest.approx(1 - delta, abs=1e-6)
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "GMD anchor critical ratio 0.61 +- 0.03")
def test_gmd_critical_ratio():
    sd.clear_cache()
    curve, elapsed = _timed(sd.sd_curve, gmd_anchor())
    _, delta_c = sd.convexify(curve)
    print(f"delta_c = {delta_c:.3f} in {elapsed:.1f} s")
    assert abs(delta_c - 0.61) <= 0.03
    assert elapsed < 30


@criterion(3, "GGD anchor critical ratio 0.15 +- 0.03")
def test_ggd_critical_ratio():
    sd.clear_cache()
    curve, elapsed = _timed(sd.sd_curve, ggd_anchor())
    _, delta_c = sd.convexify(curve)
    print(f"delta_c = {delta_c:.3f} in {elapsed:.1f} s")
    assert abs(delta_c - 0.15) <= 0.03
    assert elapsed < 120


@criterion(4, "SD curve above both bounds; neither bound dominates")
@pytest.mark.parametrize("prior", [gmd_anchor(), ggd_anchor()], ids=["gmd", "ggd"])
def test_bound_ordering(prior):
    curve = sd.sd_curve(prior)
    e, m = sd.bound_curves(prior, curve.deltas)
    assert np.all(curve.distortions >= np.maximum(e, m) - 1e-9)
    low = curve.deltas <= 0.05
    assert np.all(m[low] > e[low])
    mid = (curve.deltas > 0.05) & (curve.deltas < 0.95)
    assert np.any(e[mid] >= m[mid])


@criterion(5, "MBB piecewise closed form")
def test_mbb_closed_form():
    p = gmd_anchor()
    mix = p.variance_mixture()
    assert sd.mbb(mix, 0.0) == p.variance()
    assert sd.mbb(mix, p.lam) == pytest.approx((1 - p.lam) * p.sigma_s2, rel=1e-15, abs=0)
    assert sd.mbb(mix, 1.0) == 0.0


@pytest.fixture(scope="module")
def bamp_runs():
    """Plain BAMP at n = 1e4 over 20 trials for both ratios, timed together."""
    prior = gmd_anchor()
    t0 = time.perf_counter()
    runs = {d: monte_carlo_sd(prior, d, 10_000, 20, "bamp", seed=2024, return_samples=True) for d in (0.4, 0.7)}
    return runs, time.perf_counter() - t0


@criterion(6, "BAMP Monte Carlo matches the state-evolution fixed point")
def test_se_vs_monte_carlo(bamp_runs):
    runs, elapsed = bamp_runs
    prior = gmd_anchor()
    for delta, (mean, se, _) in runs.items():
        target = sd.state_evolution_fixed_point(prior, delta)
        print(f"delta={delta}: empirical {mean:.5g} +- {se:.2g}, SE {target:.5g}")
        assert abs(mean - target) <= max(0.1 * target, 3 * se)
    assert elapsed < 300


@criterion(7, "greedy allocation equals brute force")
def test_allocation_optimality():
    t0 = time.perf_counter()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        sizes = [int(v) for v in rng.integers(1, 13, size=3)]
        priors = [GmdPrior(float(rng.uniform(0.05, 0.6)), 1.0, float(rng.uniform(1e-3, 0.2))) for _ in range(3)]
        variances = rng.uniform(0.1, 5.0, size=3)
        model = BandModel.from_priors(sizes, [gaussian(1.0)] * 3)
        model = BandModel(tuple(type(b)(b.n, p, float(v)) for b, p, v in zip(model.bands, priors, variances)))
        curves = model.curves(0.05)
        budget = int(rng.integers(0, model.total + 1))
        g = band_objective(model, curves, greedy_allocate(model, budget, curves).m)
        b = band_objective(model, curves, brute_force_allocate(model, budget, curves).m)
        assert abs(g - b) <= 1e-12
    assert time.perf_counter() - t0 < 60


@criterion(8, "soft information beats plain BAMP (paired sign test)")
def test_soft_information_gain(bamp_runs):
    plain = bamp_runs[0][0.4][2]
    soft = monte_carlo_sd(gmd_anchor(), 0.4, 10_000, 20, "bamp_soft_oracle", seed=2024, return_samples=True)[2]
    wins = int(np.sum(soft < plain))
    p = binomtest(wins, 20, 0.5, alternative="greater").pvalue
    print(f"soft {soft.mean():.5g} vs plain {plain.mean():.5g}; wins {wins}/20, p={p:.2g}")
    assert soft.mean() < plain.mean()
    assert p < 0.05


def _hmt_setup():
    params = HmtParams(0.5108, 0.95, 0.05)
    lam = marginal_activity(params, 5)
    table = average_gmd()
    priors = [table[0]] + [GmdPrior(float(l), p.sigma_l2, p.sigma_s2) for l, p in zip(lam, table[1:])]
    return params, priors


@criterion(9, "turbo decoding beats bandwise BAMP on HMT data")
def test_turbo_gain():
    params, priors = _hmt_setup()
    turbo, plain = [], []
    for seed in range(20):
        img, _ = synthetic_hmt_image(priors, params, (64, 64), 5, seed=seed)
        kw = dict(model_source="fixed", priors=priors, seed=seed)
        plain.append(image_pipeline(img, 0.3, decoder="bamp", **kw)[2]["mse"])
        turbo.append(image_pipeline(img, 0.3, decoder="turbo", hmt_params=params, **kw)[2]["mse"])
    turbo, plain = np.array(turbo), np.array(plain)
    print(f"turbo {turbo.mean():.4g} vs bamp {plain.mean():.4g}; wins {np.sum(turbo < plain)}/20")
    assert turbo.mean() < plain.mean()


@criterion(9, "turbo decoding beats bandwise BAMP on HMT data")
def test_hmt_posterior_exact():
    rng = np.random.default_rng(9)
    tree = quad_tree_index((8, 8), 3)  # three 21-node trees
    params = HmtParams(0.4, (0.9, 0.8), (0.1, 0.25))
    L = rng.uniform(0.01, 1.0, size=(tree.size, 2))
    L /= L.sum(axis=1, keepdims=True)
    post = hmt_posterior(L, params, tree).posterior
    for root in tree.roots:
        nodes = subtree(tree, int(root))
        assert len(nodes) == 21
        for k, v in brute_force_marginals(L, params, tree, nodes).items():
            assert abs(post[k] - v) <= 1e-10


@criterion(10, "wavelet perfect reconstruction and energy preservation")
def test_wavelet_integrity():
    rng = np.random.default_rng(10)
    assert sum(band_sizes((256, 256), 5)) == 256 * 256
    for _ in range(50):
        img = rng.random((256, 256))
        pyr = dwt2(img, 5)
        assert sum(b.size for b in band_vectorize(pyr)) == img.size
        assert abs(np.sum(pyr.coefficients() ** 2) / np.sum(img**2) - 1) <= 1e-9
        assert np.max(np.abs(idwt2(pyr) - img)) <= 1e-10


@criterion(11, "EM and moment matching recover synthetic parameters")
def test_estimator_recovery():
    rng = np.random.default_rng(11)
    truth = GmdPrior(0.38, 1.198, 0.004)
    fit = estimate_gmd(truth.sample(100_000, rng))
    assert abs(fit.lam - truth.lam) <= 0.05
    assert fit.sigma_l2 == pytest.approx(truth.sigma_l2, rel=0.1)
    assert fit.sigma_s2 == pytest.approx(truth.sigma_s2, rel=0.1)
    assert abs(estimate_ggd(rng.laplace(size=100_000)).alpha - 1.0) <= 0.1


@criterion(12, "SD prediction within 1.5 dB; greedy beats uniform at 10%")
def test_psnr_prediction():
    priors = cameraman_gmd()
    for seed in range(5):
        img = synthetic_image(priors, (128, 128), 5, seed=seed)
        kw = dict(model_source="fixed", priors=priors, seed=seed)
        for delta in (0.1, 0.15, 0.25, 0.3):
            _, got, report = image_pipeline(img, delta, **kw)
            print(f"seed {seed} delta {delta}: {got:.2f} dB vs predicted {report['predicted_psnr']:.2f} dB")
            assert abs(got - report["predicted_psnr"]) <= 1.5
        uniform = image_pipeline(img, 0.1, allocator="uniform", **kw)[1]
        greedy = image_pipeline(img, 0.1, **kw)[1]
        assert greedy > uniform
