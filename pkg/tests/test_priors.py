import math
import pickle

import numpy as np
import pytest
from scipy import integrate, stats

from slabtest import stdnorm
from slabtest.exceptions import DomainError
from slabtest.priors import LaplacePrior, QuadraturePrior, QuasiCauchyPrior, parse_prior

GRID = np.arange(0.5, 10.01, 0.5)


def test_quasi_cauchy_density_at_zero(qc):
    assert qc.slab_density(0.0) == pytest.approx(stdnorm.PHI0 / 2, rel=1e-14)
    assert QuadraturePrior("quasi-cauchy").slab_density(0.0) == pytest.approx(0.19947114, abs=1e-8)


def test_laplace_density_at_zero(lap):
    closed = 0.25 * math.exp(0.125) * 2 * stdnorm.upper_tail(0.5)
    assert lap.slab_density(0.0) == pytest.approx(closed, rel=1e-13)
    assert QuadraturePrior("laplace:0.5").slab_density(0.0) == pytest.approx(closed, rel=1e-9)
    # frozen quadrature-oracle value
    assert lap.slab_density(0.0) == pytest.approx(0.1748094, abs=1e-7)


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5), LaplacePrior(2.0)])
def test_density_symmetric(prior):
    x = np.linspace(0, 12, 49)
    np.testing.assert_array_equal(prior.slab_density(x), prior.slab_density(-x))


def test_quasi_cauchy_density_series_branch_continuous(qc):
    x = np.array([0.999e-3, 1.001e-3])
    direct = stdnorm.PHI0 * -np.expm1(-x * x / 2) / (x * x)
    np.testing.assert_allclose(qc.slab_density(x), direct, rtol=1e-9)


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5)])
def test_tail_at_zero_is_half(prior):
    assert prior.slab_tail(0.0) == pytest.approx(0.5, rel=1e-14)


def test_quasi_cauchy_tail_at_five(qc):
    expect = stdnorm.upper_tail(5.0) + (stdnorm.phi(0.0) - stdnorm.phi(5.0)) / 5
    assert qc.slab_tail(5.0) == pytest.approx(expect, rel=1e-14)
    # frozen oracle value
    assert abs(qc.slab_tail(5.0) - 0.0797884454) < 1e-10
    assert qc.slab_tail(5.0) == pytest.approx(QuadraturePrior("quasi-cauchy").slab_tail(5.0), rel=1e-9)


def test_laplace_tail_against_quadrature(lap):
    assert lap.slab_tail(3.0) == pytest.approx(QuadraturePrior("laplace:0.5").slab_tail(3.0), rel=1e-8)


def test_tail_negative_argument(qc, lap):
    for prior in (qc, lap):
        x = np.array([0.3, 2.0, 7.0])
        np.testing.assert_allclose(prior.slab_tail(-x), 1 - prior.slab_tail(x), rtol=1e-14)


def test_beta_values(qc):
    assert qc.beta(0.0) == pytest.approx(-0.5, rel=1e-14)
    assert qc.beta(2.0) == pytest.approx((math.e**2 - 1) / 4 - 1, rel=1e-13)
    assert qc.beta(2.0) == pytest.approx(0.59726, abs=1e-5)


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5), LaplacePrior(3.0)])
def test_beta_and_g_over_phi_increasing(prior):
    x = np.linspace(0, 10, 1000)
    assert np.all(np.diff(prior.beta(x)) > 0)
    assert np.all(np.diff(prior.log_density_ratio(x)) > 0)


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5)])
def test_tail_ratio_increasing_from_one(prior):
    x = np.linspace(0, 10, 1000)
    ratio = prior.log_slab_tail(x) - stdnorm.log_upper_tail(x)
    assert ratio[0] == pytest.approx(0.0, abs=1e-14)
    assert np.all(np.diff(ratio) > 0)
    assert ratio[-1] > 20


def test_half_conv_at_zero(qc, lap):
    for prior in (qc, lap):
        assert prior.half_conv_neg(0.0) == pytest.approx(prior.slab_density(0.0) / 2, rel=1e-13)


def test_laplace_half_conv_against_quadrature(lap):
    oracle = QuadraturePrior("laplace:0.5")
    assert lap.half_conv_neg(2.0) == pytest.approx(oracle.half_conv_neg(2.0), rel=1e-7)


# g_-(x) <= gamma(0) phi(x) / 2 only holds past a prior-dependent point:
# the Mills ratio exceeds 1/2 on [0, 1.5) roughly
CROSSOVER = {"quasi-cauchy": 0.46442051627, "laplace:0.5": 1.07185768838}


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5)])
def test_half_conv_half_gamma_bound_valid_domain(prior):
    x = np.linspace(CROSSOVER[prior.id] + 1e-6, 10, 400)
    assert np.all(prior.half_conv_ratio(x) <= prior.slab_raw_density(0.0) / 2)


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5)])
def test_half_conv_half_gamma_bound_fails_near_zero(prior):
    gamma0 = float(prior.slab_raw_density(0.0))
    x = np.linspace(0, CROSSOVER[prior.id] - 1e-6, 50)
    assert np.all(prior.half_conv_ratio(x) > gamma0 / 2)
    # confirmed independently of the closed forms
    oracle = QuadraturePrior(prior.id)
    assert oracle.half_conv_ratio(0.0) > gamma0 / 2


def test_half_conv_at_zero_values(qc, lap):
    assert qc.half_conv_ratio(0.0) == pytest.approx(0.25, rel=1e-12)
    assert lap.half_conv_ratio(0.0) == pytest.approx(0.25 * stdnorm.mills_ratio(0.5), rel=1e-12)


def test_half_conv_bound_mills_form(qc, lap):
    # the bound that the argument actually delivers: g_-/phi <= gamma(0) R(x)
    x = np.linspace(0, 10, 201)
    for prior in (qc, lap):
        assert np.all(prior.half_conv_ratio(x) <= prior.slab_raw_density(0.0) * stdnorm.mills_ratio(x) * (1 + 1e-12))


def test_raw_density_values(qc, lap):
    assert lap.slab_raw_density(0.0) == 0.25
    assert qc.slab_raw_density(0.0) == pytest.approx(0.39894228, rel=1e-8)


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5)])
def test_raw_density_integrates_to_one(prior):
    total = 2 * integrate.quad(prior.slab_raw_density, 0, np.inf, epsabs=1e-13, limit=500)[0]
    assert abs(total - 1) < 1e-8


def test_closed_forms_match_quadrature(prior_pair):
    closed, oracle = prior_pair
    for x in GRID:
        assert closed.slab_density(x) == pytest.approx(oracle.slab_density(x), rel=1e-7)
        assert closed.slab_tail(x) == pytest.approx(oracle.slab_tail(x), rel=1e-7)
        assert closed.half_conv_neg(x) == pytest.approx(oracle.half_conv_neg(x), rel=1e-7)
        assert closed.half_conv_neg(-x) == pytest.approx(oracle.half_conv_neg(-x), rel=1e-7)


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5)])
def test_tail_law(prior):
    y = np.linspace(5, 30, 51)
    ratio = prior.slab_tail(y) / (prior.slab_density(y) * y ** (prior.kappa - 1))
    assert np.all((ratio >= 1 / 3) & (ratio <= 3))


def test_lipschitz_constants():
    assert QuasiCauchyPrior().lipschitz == 1.0
    assert LaplacePrior(0.7).lipschitz == 0.7
    assert QuasiCauchyPrior().kappa == 2 and LaplacePrior().kappa == 1


def test_log_density_ratio_large_x(qc, lap):
    # stays finite where g/phi itself overflows
    for prior in (qc, lap):
        lr = prior.log_density_ratio(np.array([40.0, 100.0]))
        assert np.all(np.isfinite(lr)) and lr[1] > lr[0] > 500


@pytest.mark.parametrize("prior", [QuasiCauchyPrior(), LaplacePrior(0.5)])
def test_sampler_matches_tail(prior):
    gen = np.random.default_rng(7)
    theta = prior.sample_slab(gen, 200_000)
    x = theta + gen.standard_normal(theta.size)
    for c in (0.5, 2.0, 5.0):
        p = float(prior.slab_tail(c))
        se = math.sqrt(p * (1 - p) / x.size)
        assert abs(np.mean(x > c) - p) < 4 * se


def test_sampler_raw_density_ks(qc):
    theta = qc.sample_slab(np.random.default_rng(3), 20_000)

    def cdf(u):
        u = np.atleast_1d(u)
        return np.array([0.5 + math.copysign(1, v) * integrate.quad(qc.slab_raw_density, 0, abs(v))[0] for v in u])

    assert stats.kstest(theta[:2000], cdf).pvalue > 1e-3


def test_parse_prior():
    assert parse_prior("quasi-cauchy") == QuasiCauchyPrior()
    assert parse_prior("laplace") == LaplacePrior(0.5)
    assert parse_prior("laplace:2").a == 2.0
    assert parse_prior(parse_prior("laplace:0.5").id) == LaplacePrior(0.5)
    assert isinstance(parse_prior("quadrature:cauchy"), QuadraturePrior)
    with pytest.raises(DomainError, match="known priors"):
        parse_prior("cauchy-exact")
    with pytest.raises(DomainError):
        parse_prior("laplace:abc")


def test_quadrature_prior_pickles():
    p = QuadraturePrior("laplace:0.5")
    q = pickle.loads(pickle.dumps(p))
    assert q == p
    assert q.slab_density(1.0) == pytest.approx(p.slab_density(1.0), rel=1e-12)


def test_cauchy_quadrature_prior_is_a_density():
    p = QuadraturePrior("cauchy")
    assert p.slab_tail(0.0) == pytest.approx(0.5, rel=1e-8)
    assert p.half_conv_neg(0.0) == pytest.approx(p.slab_density(0.0) / 2, rel=1e-8)
