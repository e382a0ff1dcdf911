import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from sdcs.priors import (
    H_GAUSS,
    GgdPrior,
    GmdPrior,
    QuadratureError,
    VarianceMixture,
    differential_entropy,
    gaussian,
    ggd_variance_mixture,
    gmd_variance_mixture,
    mmse_denoise,
    pdf,
    prior_from_dict,
    prior_to_dict,
    sample,
    scalar_mmse,
    variance,
)

INV_SQRT_2PI = 1 / math.sqrt(2 * math.pi)

gmd_params = st.tuples(
    st.floats(0.01, 0.99),
    st.floats(0.05, 10.0),
    st.floats(1e-3, 0.9),
).map(lambda t: GmdPrior(t[0], t[1], t[1] * t[2]))
ggd_params = st.tuples(st.floats(0.3, 2.0), st.floats(0.1, 5.0)).map(lambda t: GgdPrior(*t))


# -- densities ----------------------------------------------------------------

def test_pdf_gaussian_reductions():
    assert pdf(GmdPrior(1, 1, 1), 0.0) == pytest.approx(INV_SQRT_2PI, rel=1e-12)
    assert pdf(GgdPrior(2, 1), 0.0) == pytest.approx(INV_SQRT_2PI, rel=1e-12)


def test_pdf_anchor_gmd_at_zero(gmd):
    # two-component mixture evaluated term by term
    want = 0.38 * stats.norm.pdf(0, scale=math.sqrt(1.198)) + 0.62 * stats.norm.pdf(0, scale=math.sqrt(0.004))
    assert pdf(gmd, 0.0) == pytest.approx(want, rel=1e-12)


def test_pdf_ggd_alpha2_matches_gaussian():
    x = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(pdf(GgdPrior(2.0, 2.5), x), stats.norm.pdf(x, scale=math.sqrt(2.5)), rtol=1e-12)


def test_pdf_rejects_nonfinite(gmd):
    with pytest.raises(ValueError):
        pdf(gmd, np.nan)
    with pytest.raises(ValueError):
        pdf(gmd, [0.0, np.inf])


@pytest.mark.parametrize("prior", [GmdPrior(0.38, 1.198, 0.004), GgdPrior(0.4, 1.0), GgdPrior(1.3, 2.0)])
def test_pdf_symmetric_and_normalized(prior):
    x = np.linspace(0.01, 7, 50)
    np.testing.assert_allclose(pdf(prior, x), pdf(prior, -x), rtol=1e-14)
    s = math.sqrt(prior.variance())
    # piecewise adaptive integration; the GGD cusp at 0 needs a breakpoint
    total = 0.0
    for a, b in [(-40 * s, -s), (-s, 0), (0, s), (s, 40 * s)]:
        total += integrate.quad(lambda t: prior.pdf(t), a, b, limit=400, epsabs=1e-13)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


# -- moments and sampling -----------------------------------------------------

def test_variance_examples(gmd, ggd):
    assert variance(gmd) == pytest.approx(0.45772, abs=1e-12)
    assert variance(ggd) == 1.0
    for lam in (0.0, 0.3, 1.0):
        assert variance(GmdPrior(lam, 2.5, 2.5)) == pytest.approx(2.5)


def test_ggd_variance_matches_integral():
    p = GgdPrior(0.7, 1.7)
    val = 2 * integrate.quad(lambda t: t * t * p.pdf(t), 0, np.inf, limit=400)[0]
    assert val == pytest.approx(1.7, rel=1e-7)


def test_sample_moments_and_determinism():
    x = sample(GmdPrior(1, 4, 0.01), 100_000, seed=1)
    assert np.var(x) == pytest.approx(4.0, rel=0.05)
    g = sample(GgdPrior(2, 1), 100_000, seed=2)
    assert stats.kurtosis(g, fisher=False) == pytest.approx(3.0, rel=0.1)
    np.testing.assert_array_equal(sample(GgdPrior(0.4, 1), 50, seed=7), sample(GgdPrior(0.4, 1), 50, seed=7))


def test_sample_rejects_empty(gmd):
    with pytest.raises(ValueError):
        sample(gmd, 0, seed=0)


def test_ggd_sample_kurtosis_laplace():
    x = sample(GgdPrior(1.0, 1.0), 200_000, seed=3)
    assert np.var(x) == pytest.approx(1.0, rel=0.03)
    assert stats.kurtosis(x, fisher=False) == pytest.approx(6.0, rel=0.1)


# -- denoiser -----------------------------------------------------------------

def test_denoise_gaussian_shrinkage():
    xhat, p1 = mmse_denoise(GmdPrior(1, 1, 0.3), 2.0, 1.0)
    assert xhat == pytest.approx(1.0)
    assert p1 == pytest.approx(1.0)


@pytest.mark.parametrize("prior", [GmdPrior(0.38, 1.198, 0.004), GgdPrior(0.4, 1.0)])
def test_denoise_zero_input(prior):
    assert mmse_denoise(prior, 0.0, 0.3)[0] == pytest.approx(0.0, abs=1e-12)


def _brute_posterior_mean(prior, y, v):
    lik = lambda t: prior.pdf(t) * math.exp(-0.5 * (y - t) ** 2 / v)
    pts = sorted({0.0, y})
    lo, hi = min(pts) - 30, max(pts) + 30
    num = integrate.quad(lambda t: t * lik(t), lo, hi, points=pts, limit=500, epsabs=0, epsrel=1e-12)[0]
    den = integrate.quad(lik, lo, hi, points=pts, limit=500, epsabs=0, epsrel=1e-12)[0]
    return num / den


def test_gmd_denoiser_matches_quadrature(gmd):
    for y, v in [(1.0, 0.1), (-0.3, 0.01), (2.5, 0.5), (0.05, 0.002)]:
        assert mmse_denoise(gmd, y, v)[0] == pytest.approx(_brute_posterior_mean(gmd, y, v), abs=1e-8)


def test_ggd_denoiser_matches_quadrature(ggd):
    for y, v in [(1.0, 0.1), (-0.3, 0.01), (3.0, 0.5)]:
        assert mmse_denoise(ggd, y, v)[0] == pytest.approx(_brute_posterior_mean(ggd, y, v), abs=1e-6)


def test_ggd_large_batch_matches_pointwise(ggd):
    y = np.linspace(-4, 4, 1001)
    batch = ggd.posterior(y, 0.05)
    few = ggd.posterior(y[::50], 0.05)
    np.testing.assert_allclose(batch[0][::50], few[0], atol=1e-7)
    np.testing.assert_allclose(batch[1][::50], few[1], atol=1e-7)


def test_denoise_rejects_bad_noise(gmd):
    with pytest.raises(ValueError):
        mmse_denoise(gmd, 1.0, 0.0)


@given(gmd_params, st.floats(-20, 20), st.floats(1e-3, 10))
def test_gmd_denoiser_odd_and_contractive(prior, y, v):
    a = mmse_denoise(prior, y, v)[0]
    b = mmse_denoise(prior, -y, v)[0]
    assert a == pytest.approx(-b, abs=1e-12)
    assert abs(a) <= abs(y) + 1e-12


@given(st.floats(0.3, 1.9), st.floats(-6, 6), st.floats(1e-2, 2))
def test_ggd_denoiser_odd_and_contractive(alpha, y, v):
    prior = GgdPrior(alpha, 1.0)
    a = mmse_denoise(prior, y, v)[0]
    b = mmse_denoise(prior, -y, v)[0]
    assert a == pytest.approx(-b, abs=1e-9)
    assert abs(a) <= abs(y) + 1e-9


# -- expected error -----------------------------------------------------------

@pytest.mark.parametrize("v", [1e-4, 0.1, 1.0, 30.0])
def test_scalar_mmse_gaussian_closed_form(v):
    assert scalar_mmse(GmdPrior(1, 1, 1), v) == pytest.approx(v / (1 + v), rel=1e-12)


@pytest.mark.parametrize("prior", [GmdPrior(0.38, 1.198, 0.004), GgdPrior(0.4, 1.0)])
def test_scalar_mmse_uninformative_limit(prior):
    assert scalar_mmse(prior, 1e6) == pytest.approx(prior.variance(), rel=0.01)


@pytest.mark.parametrize("prior", [GmdPrior(0.38, 1.198, 0.004), GmdPrior(0.1, 5.0, 0.5), GgdPrior(0.4, 1.0)])
def test_scalar_mmse_bounded_and_monotone(prior):
    vs = np.geomspace(1e-4, 1e3, 20)
    vals = np.array([scalar_mmse(prior, v) for v in vs])
    assert np.all(vals <= np.minimum(vs, prior.variance()) * (1 + 1e-9))
    assert np.all(np.diff(vals) >= 0)


def test_gmd_mmse_monte_carlo(gmd, rng):
    v = 0.05
    states = rng.random(2_000_000) < gmd.lam
    x = np.where(states, math.sqrt(gmd.sigma_l2), math.sqrt(gmd.sigma_s2)) * rng.standard_normal(states.size)
    err = (gmd.posterior(x + math.sqrt(v) * rng.standard_normal(x.size), v)[0] - x) ** 2
    se = err.std() / math.sqrt(err.size)
    assert abs(err.mean() - scalar_mmse(gmd, v)) < 3 * se


def test_ggd_mmse_monte_carlo(ggd):
    # 10^7 draws in chunks
    v, chunks, size = 0.01, 10, 1_000_000
    gen = np.random.default_rng(99)
    sums, sq = 0.0, 0.0
    for _ in range(chunks):
        x = ggd.sample(size, gen)
        e = (ggd.posterior(x + math.sqrt(v) * gen.standard_normal(size), v)[0] - x) ** 2
        sums += e.sum()
        sq += (e * e).sum()
    n = chunks * size
    mean = sums / n
    se = math.sqrt((sq / n - mean**2) / n)
    assert abs(mean - scalar_mmse(ggd, v)) < 3 * se


def test_quadrature_guard_raises():
    # a single Gauss-Legendre panel cannot resolve a very narrow small component
    p = GmdPrior(0.5, 1.0, 1e-9)
    with pytest.raises(QuadratureError):
        p.scalar_mmse(1e-10, order=4)


# -- entropy ------------------------------------------------------------------

def test_entropy_gaussian_cases():
    assert differential_entropy(GgdPrior(2, 1)) == pytest.approx(H_GAUSS, abs=1e-12)
    assert differential_entropy(GmdPrior(1, 1, 0.2)) == pytest.approx(H_GAUSS, abs=1e-12)
    assert H_GAUSS == pytest.approx(2.0471, abs=1e-4)


def test_ggd_entropy_closed_form_vs_numeric(ggd):
    def integrand(t):
        p = ggd.pdf(t)
        return -p * math.log2(p) if p > 0 else 0.0
    edges = [0, 1e-8, 1e-4, 1e-2, 1, 10, 100, 2000]
    num = 2 * sum(integrate.quad(integrand, a, b, limit=400, epsabs=1e-13)[0] for a, b in zip(edges[:-1], edges[1:]))
    assert differential_entropy(ggd) == pytest.approx(num, abs=1e-5)


@pytest.mark.parametrize("prior", [GmdPrior(0.38, 1.198 / 0.45772, 0.004 / 0.45772), GgdPrior(0.4, 1), GgdPrior(1, 1),
                                   GgdPrior(1.8, 1)])
def test_entropy_below_gaussian_for_unit_variance(prior):
    assert prior.variance() == pytest.approx(1.0, rel=1e-9)
    assert differential_entropy(prior) < H_GAUSS


# -- variance mixtures --------------------------------------------------------

def test_gmd_mixture_atoms(gmd):
    assert gmd_variance_mixture(gmd).atoms == [(1.198, 0.38), pytest.approx((0.004, 0.62))]
    assert gmd_variance_mixture(GmdPrior(1, 3, 0.5)).atoms == [(3.0, 1.0)]
    assert gmd_variance_mixture(GmdPrior(0.5, 2, 1)).atoms == [(2.0, 0.5), (1.0, 0.5)]


def test_ggd_mixture_gaussian_single_atom():
    assert ggd_variance_mixture(GgdPrior(2, 1)).atoms == [(1.0, 1.0)]


@pytest.mark.parametrize("alpha", [0.4, 0.7, 1.0, 1.5])
def test_ggd_mixture_reconstructs_density(alpha):
    p = GgdPrior(alpha, 1.0)
    mix = ggd_variance_mixture(p)
    assert mix.variance() == pytest.approx(1.0, rel=0.01)
    assert abs(mix.weights.sum() - 1) < 1e-8
    x = np.linspace(0, 5, 51)
    np.testing.assert_allclose(mix.pdf(x), p.pdf(x), rtol=0.02)


def test_laplace_mixing_density():
    # unit-variance Laplace: exponential mixing density on tau with mean 1
    mix = ggd_variance_mixture(GgdPrior(1.0, 1.0))
    tau, w = mix.taus, mix.weights
    dlog = math.log(tau[0] / tau[1])
    want = np.exp(-tau) * tau * dlog
    sel = (tau > 0.05) & (tau < 5)
    np.testing.assert_allclose(w[sel], want[sel], rtol=0.02)


def test_ggd_mixture_rejects_heavy_shape():
    with pytest.raises(ValueError):
        GgdPrior(2.5, 1).variance_mixture()


def test_mixture_validation():
    with pytest.raises(ValueError):
        VarianceMixture(np.array([1.0, 0.5]), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        VarianceMixture(np.array([1.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        VarianceMixture(np.array([1.0, -1.0]), np.array([0.5, 0.5]))
    m = VarianceMixture(np.array([0.5, 2.0]), np.array([0.3, 0.7]))
    assert m.atoms[0] == (2.0, 0.7)


# -- validation and serialisation ---------------------------------------------

def test_prior_validation():
    with pytest.raises(ValueError):
        GmdPrior(1.2, 1, 0.1)
    with pytest.raises(ValueError):
        GmdPrior(0.5, 0.1, 1)
    with pytest.raises(ValueError):
        GgdPrior(0, 1)
    with pytest.raises(ValueError):
        GgdPrior(1, -1)


@given(st.one_of(gmd_params, ggd_params))
def test_dict_round_trip(prior):
    assert prior_from_dict(prior_to_dict(prior)) == prior


def test_dict_gaussian_kind():
    assert prior_from_dict({"kind": "gaussian", "sigma2": 2.0}) == gaussian(2.0)
    with pytest.raises(ValueError):
        prior_from_dict({"kind": "cauchy"})


def test_positive_stable_density_levy_case():
    # index 1/2 has the closed-form Levy density
    from sdcs.priors import _positive_stable_logpdf

    x = np.array([0.01, 0.1, 1.0, 10.0])
    levy = x**-1.5 * np.exp(-1 / (4 * x)) / (2 * math.sqrt(math.pi))
    np.testing.assert_allclose(np.exp(_positive_stable_logpdf(x, 0.5)), levy, rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.4, 1.0])
def test_stehfest_inversion_agrees(alpha):
    p = GgdPrior(alpha, 1.0)
    mix = ggd_variance_mixture(p, method="stehfest")
    x = np.linspace(0, 5, 51)
    np.testing.assert_allclose(mix.pdf(x), p.pdf(x), rtol=0.02)
