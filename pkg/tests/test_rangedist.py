import math

import numpy as np
import pytest
from scipy import integrate

from svrg import rangedist
from svrg.config import Representation
from svrg.errors import DomainError

A, B = Representation.series_a, Representation.series_b


@pytest.mark.parametrize("sigma2", [0.25, 1.0, 4.0])
def test_density_integrates_to_one(sigma2):
    def density(r):
        return rangedist.range_density(r, sigma2).value

    scale = math.sqrt(sigma2)
    total = sum(
        integrate.quad(density, lo * scale, hi * scale, epsabs=1e-12, limit=200)[0]
        for lo, hi in ((0.0, 1.0), (1.0, 3.0), (3.0, 12.0))
    )
    assert total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("x", [1.5, 2.0, 3.0, 5.0, 8.0])
def test_representations_agree(x):
    a = rangedist.range_density(math.sqrt(x), 1.0, representation=A).value
    b = rangedist.range_density(math.sqrt(x), 1.0, representation=B).value
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("r", [0.3, 1.0, 1.6, 2.5, 4.0])
def test_brackets_contain_value(r):
    result = rangedist.range_density(r, 1.0)
    assert result.lower_bracket <= result.value <= result.upper_bracket
    assert result.terms_used >= 2


def test_default_representation():
    assert rangedist.range_density(math.sqrt(1.9), 1.0).representation is B
    assert rangedist.range_density(math.sqrt(2.5), 1.0).representation is A
    assert rangedist.select_representation(2.0) is B


@pytest.mark.parametrize("x", np.linspace(1.34, 30.0, 40))
def test_series_a_terms_decrease(x):
    terms = [rangedist.range_term(k, x, A) for k in range(12)]
    assert all(later < earlier for earlier, later in zip(terms, terms[1:]) if earlier > 0)


@pytest.mark.parametrize("x", np.linspace(0.05, 9.8, 40))
def test_series_b_terms_decrease(x):
    terms = [rangedist.range_term(k, x, B) for k in range(12)]
    assert all(later < earlier for earlier, later in zip(terms, terms[1:]) if earlier > 0)


def strictly_decreasing(x, representation, n_terms=50):
    logs = [rangedist.log_range_term(k, x, representation) for k in range(n_terms)]
    return all(later < earlier for earlier, later in zip(logs, logs[1:]))


@pytest.mark.parametrize("r_tilde2", np.geomspace(0.01, 100.0, 25))
def test_latent_terms_decrease_below_three_quarters(r_tilde2):
    for sigma2 in r_tilde2 * np.linspace(0.01, 0.749, 40):
        assert strictly_decreasing(r_tilde2 / sigma2, A), sigma2


@pytest.mark.parametrize("r_tilde2", np.geomspace(0.01, 100.0, 25))
def test_latent_terms_decrease_above_inverse_pi2(r_tilde2):
    for sigma2 in r_tilde2 * np.linspace(1.01 / math.pi ** 2, 20.0, 40):
        assert strictly_decreasing(r_tilde2 / sigma2, B), sigma2


def test_log_range_term():
    assert rangedist.log_range_term(0, 5.0, A) == 0.0
    assert rangedist.log_range_term(3, 2.5, B) == pytest.approx(
        math.log(rangedist.range_term(3, 2.5, B))
    )
    # the linear term underflows, the log stays exact
    assert rangedist.range_term(5, 2000.0, A) == 0.0
    assert rangedist.log_range_term(5, 2000.0, A) == pytest.approx(2 * math.log(6) - 35000.0)


def test_range_terms_generator():
    terms = rangedist.range_terms(3.0, A)
    assert next(terms) == 1.0
    assert next(terms) == pytest.approx(4.0 * math.exp(-4.5))


def test_log_range_density():
    assert rangedist.log_range_density(1.2, 0.8) == pytest.approx(
        math.log(rangedist.range_density(1.2, 0.8).value)
    )


def test_log_range_density_deep_tail():
    assert math.isfinite(rangedist.log_range_density(0.01, 4.0))
    assert math.isfinite(rangedist.log_range_density(40.0, 1.0))


@pytest.mark.parametrize("c_th", [1.0, 4.0 / 3.0, 10.0])
def test_threshold_rejected(c_th):
    with pytest.raises(DomainError):
        rangedist.check_threshold(c_th)


@pytest.mark.parametrize("r,sigma2", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (math.inf, 1.0)])
def test_density_rejects(r, sigma2):
    with pytest.raises(DomainError):
        rangedist.range_density(r, sigma2)


def test_mixture_weights_positive():
    p, q = rangedist.mixture_weights()
    assert 0 < p < 1
    assert 0 < q < 1


@pytest.mark.parametrize("u,accepted", [(0.5, True), (0.99, False), (1.5, False)])
def test_alternating_series_accept(u, accepted):
    # at x = 3 the series sums to about 0.956
    assert rangedist.alternating_series_accept(3.0, A, u) is accepted


def test_sampler_mean(rng):
    draws = np.array([rangedist.sample_normalized_range_sq(rng).x for _ in range(4000)])
    standard_error = math.sqrt(3.1313 / len(draws))
    assert abs(draws.mean() - 4.0 * math.log(2.0)) < 4.0 * standard_error


def test_sample_range_scales(rng):
    draws = [rangedist.sample_range(4.0, rng) for _ in range(200)]
    assert all(r > 0 for r in draws)
    with pytest.raises(DomainError):
        rangedist.sample_range(0.0, rng)


@pytest.mark.parametrize(
    "p,expected",
    [
        (1.0, math.sqrt(8.0 / math.pi)),
        (2.0, 4.0 * math.log(2.0)),
        (4.0, 9.0 * 1.2020569031595942),
    ],
)
def test_parkinson_moment(p, expected):
    assert rangedist.parkinson_moment(p, 1.0) == pytest.approx(expected, rel=1e-10)


def test_parkinson_moment_scales():
    assert rangedist.parkinson_moment(2.0, 3.0) == pytest.approx(12.0 * math.log(2.0))


def test_parkinson_estimator():
    assert rangedist.parkinson_estimator(2.0) == pytest.approx(1.0 / math.log(2.0))
    estimates = rangedist.parkinson_estimator(np.array([1.0, 2.0]))
    assert estimates.shape == (2,)
    with pytest.raises(DomainError):
        rangedist.parkinson_estimator(np.array([1.0, -1.0]))
