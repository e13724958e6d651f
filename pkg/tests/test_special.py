import math

import numpy as np
import pytest
from scipy import integrate, special as sp

from svrg import special
from svrg.errors import DomainError, TruncationError
from svrg.models import GigParams


@pytest.mark.parametrize("alpha,x", [(0.5, 0.1), (2.0, 3.0), (7.5, 40.0), (1.0, 0.0)])
def test_log_upper_incomplete_gamma(alpha, x):
    expected = math.log(sp.gammaincc(alpha, x)) + sp.gammaln(alpha)
    assert special.log_upper_incomplete_gamma(alpha, x) == pytest.approx(expected, rel=1e-12)


def test_log_upper_incomplete_gamma_far_tail():
    # Γ(2, x) = (x + 1) e^(-x)
    assert special.log_upper_incomplete_gamma(2.0, 800.0) == pytest.approx(
        math.log(801.0) - 800.0, rel=1e-12
    )


def test_upper_incomplete_gamma():
    assert special.upper_incomplete_gamma(1.0, 2.0) == pytest.approx(math.exp(-2.0))


@pytest.mark.parametrize("alpha,x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, math.nan)])
def test_log_upper_incomplete_gamma_rejects(alpha, x):
    with pytest.raises(DomainError):
        special.log_upper_incomplete_gamma(alpha, x)


def incomplete_bessel_by_quadrature(nu, x, y):
    value, _ = integrate.quad(
        lambda t: t ** (-nu - 1.0) * math.exp(-x * t - y / t), 1.0, math.inf
    )
    return value


@pytest.mark.parametrize(
    "nu,x,y", [(1.5, 0.7, 2.0), (-2.0, 1.3, 0.4), (0.5, 0.0, 3.0), (3.0, 0.0, 0.0), (0.0, 5.0, 1.0)]
)
def test_incomplete_bessel_k(nu, x, y):
    assert special.incomplete_bessel_k(nu, x, y) == pytest.approx(
        incomplete_bessel_by_quadrature(nu, x, y), rel=1e-8
    )


def test_log_incomplete_bessel_k_huge_arguments():
    assert math.isfinite(special.log_incomplete_bessel_k(-20.0, 900.0, 1e-3))


def test_incomplete_bessel_k_diverges():
    with pytest.raises(DomainError):
        special.log_incomplete_bessel_k(-0.5, 0.0, 1.0)


def test_gig_region_mass_whole_line():
    params = GigParams(-1.5, 2.0, 1.0)
    assert special.gig_region_mass(params, (0.0, math.inf)) == pytest.approx(1.0)


def test_gig_region_mass_splits():
    params = GigParams(0.8, 1.0, 2.0)
    lower = special.gig_region_mass(params, (0.0, 0.7))
    upper = special.gig_region_mass(params, (0.7, math.inf))
    assert lower + upper == pytest.approx(1.0, rel=1e-9)


def gig_mean(params):
    omega = params.delta * params.gamma
    return params.delta / params.gamma * sp.kv(params.nu + 1, omega) / sp.kv(params.nu, omega)


@pytest.mark.parametrize("nu,delta,gamma", [(-1.5, 2.0, 1.0), (0.5, 0.3, 2.0), (2.0, 1.0, 0.5)])
def test_sample_gig_mean(rng, nu, delta, gamma):
    params = GigParams(nu, delta, gamma)
    draws = np.array([special.sample_gig(params, rng) for _ in range(4000)])
    assert np.all(draws > 0)
    standard_error = draws.std() / math.sqrt(len(draws))
    assert abs(draws.mean() - gig_mean(params)) < 4.0 * standard_error


def test_sample_gig_region(rng):
    params = GigParams(-1.5, 2.0, 1.0)
    draws = [special.sample_gig(params, rng, (1.0, 3.0)) for _ in range(200)]
    assert all(1.0 <= x < 3.0 for x in draws)


def test_sample_gig_light_region(rng):
    with pytest.raises(TruncationError):
        special.sample_gig(GigParams(1.0, 1.0, 1.0), rng, (400.0, math.inf))


def test_sample_gig_inverse_cdf_light_region(rng):
    params = GigParams(1.0, 1.0, 1.0)
    draws = [special.sample_gig_inverse_cdf(params, rng, (60.0, math.inf)) for _ in range(50)]
    assert all(x >= 60.0 for x in draws)
    # the tail is close to exponential with rate γ²/2 beyond the cut
    assert np.mean(draws) == pytest.approx(62.0, abs=1.0)


def test_sample_gig_inverse_cdf_matches_rejection(rng):
    params = GigParams(-0.5, 1.0, 1.5)
    region = (0.2, 2.0)
    by_inversion = [special.sample_gig_inverse_cdf(params, rng, region) for _ in range(3000)]
    by_rejection = [special.sample_gig(params, rng, region) for _ in range(3000)]
    assert np.mean(by_inversion) == pytest.approx(np.mean(by_rejection), abs=0.04)


def test_empty_region(rng):
    with pytest.raises(TruncationError):
        special.sample_truncated_gamma(2.0, 1.0, (3.0, 1.0), rng)


def truncated_gamma_mean(shape, rate, lo, hi):
    mass = sp.gammaincc(shape, lo * rate) - sp.gammaincc(shape, hi * rate)
    upper = sp.gammaincc(shape + 1, lo * rate) - sp.gammaincc(shape + 1, hi * rate)
    return shape / rate * upper / mass


@pytest.mark.parametrize(
    "shape,rate,region", [(0.5, 0.5, (2.0, math.inf)), (2.0, 4.9, (0.5, math.inf)), (3.0, 1.0, (0.1, 0.9))]
)
def test_sample_truncated_gamma(rng, shape, rate, region):
    draws = np.array(
        [special.sample_truncated_gamma(shape, rate, region, rng) for _ in range(4000)]
    )
    assert np.all((draws >= region[0]) & (draws <= region[1]))
    standard_error = draws.std() / math.sqrt(len(draws))
    expected = truncated_gamma_mean(shape, rate, *region)
    assert abs(draws.mean() - expected) < 4.0 * standard_error


def test_sample_truncated_gamma_far_tail(rng):
    draws = np.array(
        [special.sample_truncated_gamma(2.0, 1.0, (800.0, math.inf), rng) for _ in range(500)]
    )
    assert np.all(draws >= 800.0)
    assert draws.mean() == pytest.approx(801.0, abs=0.2)


def test_sample_truncated_normal(rng):
    draws = [special.sample_truncated_normal(0.9, 0.04, (-1.0, 1.0), rng) for _ in range(500)]
    assert all(-1.0 <= x <= 1.0 for x in draws)
    with pytest.raises(DomainError):
        special.sample_truncated_normal(0.0, 0.0, (-1.0, 1.0), rng)


def test_lognormal_moments():
    mean, variance = special.lognormal_moments(0.5, 0.2)
    assert mean == pytest.approx(math.exp(0.6))
    assert variance == pytest.approx(math.exp(1.2) * math.expm1(0.2))


def test_match_to_invgamma():
    mean, variance = special.lognormal_moments(-0.3, 0.1)
    match = special.match_lognormal_to_invgamma(-0.3, 0.1)
    assert match.beta / (match.alpha - 1) == pytest.approx(mean)
    assert match.beta ** 2 / ((match.alpha - 1) ** 2 * (match.alpha - 2)) == pytest.approx(
        variance
    )


def test_match_to_gamma():
    mean, variance = special.lognormal_moments(1.1, 0.4)
    match = special.match_lognormal_to_gamma(1.1, 0.4)
    assert match.alpha / match.beta == pytest.approx(mean)
    assert match.alpha / match.beta ** 2 == pytest.approx(variance)


@pytest.mark.parametrize("m,s", [(math.inf, 0.1), (0.0, 0.0), (0.0, -1.0)])
def test_match_rejects(m, s):
    with pytest.raises(DomainError):
        special.match_lognormal_to_gamma(m, s)
