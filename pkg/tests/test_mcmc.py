import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from svrg import mcmc
from svrg.diagnostics import inefficiency_factor
from svrg.errors import DomainError, NumericalError
from svrg.model import log_initial_kernel, log_transition_kernel
from svrg.models import LatentState, McmcConfig, Priors

TINY_RUN = McmcConfig(n_burnin=3, n_draws=8, seed=5, log_every=0)


@pytest.fixture
def short(series):
    return series.window(0, 25)


@pytest.fixture
def start(short):
    return mcmc.initial_state(short)


def test_block_stats():
    stats = mcmc.BlockStats()
    assert math.isnan(stats.rate)
    stats.record(True)
    stats.record(False)
    assert stats.rate == 0.5


def test_initial_values(short):
    state = mcmc.initial_state(short)
    assert np.allclose(state.sigma2, short.r ** 2 / (4 * math.log(2)))
    assert np.all(state.lam == 1.0)
    params = mcmc.initial_params(Priors())
    assert (params.phi, params.omega_en, params.omega_nn) == (0.95, 0.0, 0.1)
    assert (params.nu1, params.nu2) == (20.0, 20.0)


def test_sigma2_moments_last_site(short, start, params):
    moments = mcmc.sigma2_proposal_moments(len(short) - 1, start, short, params)
    assert moments.forward_precision == 0.0
    assert moments.s == pytest.approx(params.conditional_variance)
    assert moments.m == pytest.approx(moments.backward_mean)


def test_sigma2_moments_first_site(short, start, params):
    moments = mcmc.sigma2_proposal_moments(0, start, short, params)
    assert moments.backward_precision == pytest.approx(1 / params.stationary_variance)
    assert moments.backward_mean == 0.0
    assert moments.s == pytest.approx(
        1 / (moments.forward_precision + moments.backward_precision)
    )


def test_sigma_mixture(short, start, params):
    t = 4
    moments = mcmc.sigma2_proposal_moments(t, start, short, params)
    r_tilde = short.r[t] / math.sqrt(start.lam[t])
    proposal = mcmc.build_sigma_mixture(moments, short.y[t], r_tilde, 0.4)
    assert proposal.threshold == pytest.approx(0.4 * r_tilde ** 2)
    assert 0 < proposal.p_weight < 1
    assert proposal.gig_log_mass <= 0
    assert proposal.nu_t1 == pytest.approx(moments.matched.alpha + 1)


def test_sigma2_candidate_drawn(short, start, params, rng):
    moments = mcmc.sigma2_proposal_moments(3, start, short, params)
    proposal = mcmc.build_sigma_mixture(moments, short.y[3], short.r[3], 0.4)
    draws = [mcmc.draw_sigma2_candidate(proposal, rng, 1000) for _ in range(50)]
    assert all(draw is not None and draw > 0 for draw in draws)


def test_log_g_sigma2(short, start, params):
    t = 5
    value = 1.7
    expected = log_transition_kernel(
        value, short.y[t - 1], start.sigma2[t - 1], params
    ) + log_transition_kernel(start.sigma2[t + 1], short.y[t], value, params)
    assert mcmc.log_g_sigma2(t, value, start, short, params) == pytest.approx(expected)
    assert mcmc.log_g_sigma2(0, value, start, short, params) == pytest.approx(
        log_initial_kernel(value, params)
        + log_transition_kernel(start.sigma2[1], short.y[0], value, params)
    )


def test_sigma2_block(short, start, params, rng):
    stats = mcmc.BlockStats()
    mcmc.sample_sigma2_block(start, short, params, rng, McmcConfig(), stats)
    assert stats.proposed + stats.stalls == len(short)
    assert np.all(start.sigma2 > 0)
    assert stats.accepted > 0


def test_lambda_expansion_point(params):
    assert mcmc.lambda_expansion_point(params) == pytest.approx(math.log(8.0 / 14.0))
    assert mcmc.lambda_expansion_point(params.evolve(nu1=1.5)) == pytest.approx(
        math.log(1.5 / 28.0)
    )


def test_lambda_block_keeps_tilde(short, start, params, rng):
    tilde = start.sigma2_tilde.copy()
    stats = mcmc.BlockStats()
    mcmc.sample_lambda_block(start, short, params, rng, stats)
    assert np.allclose(start.sigma2_tilde, tilde)
    assert stats.proposed + stats.stalls == len(short)
    assert np.any(start.lam != 1.0)


def test_lambda_moments_first_site(short, start, params):
    moments = mcmc.lambda_proposal_moments(0, start.sigma2_tilde, start.lam, short, params)
    assert moments.backward_mean == pytest.approx(math.log(start.sigma2_tilde[0]))
    assert moments.matched.alpha > 0


def test_phi_moments_recover_ar1(params):
    rng = np.random.default_rng(1)
    h = np.empty(3000)
    h[0] = 0.0
    for t in range(len(h) - 1):
        h[t + 1] = 0.9 * h[t] + math.sqrt(0.1) * rng.standard_normal()
    sigma2 = np.exp(h)
    data_y = np.zeros(len(h))

    class Data:
        y = data_y

    state = LatentState(sigma2, np.ones(len(h)))
    no_leverage = params.evolve(omega_en=0.0, omega_nn=0.1)
    m, s = mcmc.phi_proposal_moments(state, Data, no_leverage)
    assert m == pytest.approx(0.9, abs=0.03)
    assert s < 1e-3


def test_sample_phi(short, start, params, rng):
    stats = mcmc.BlockStats()
    updated = mcmc.sample_phi(start, short, params, Priors(), rng, stats)
    assert -1 < updated.phi < 1
    assert stats.proposed + stats.stalls == 1


def test_sample_phi_stalls_on_flat_volatility(short, params, rng):
    flat = LatentState(np.ones(len(short)), np.ones(len(short)))
    with pytest.raises(NumericalError):
        mcmc.phi_proposal_moments(flat, short, params)
    stats = mcmc.BlockStats()
    assert mcmc.sample_phi(flat, short, params, Priors(), rng, stats) is params
    assert (stats.stalls, stats.proposed) == (1, 0)


def test_omega_posterior(short, start, params):
    priors = Priors()
    posterior = mcmc.omega_posterior(start, short, params, priors)
    assert posterior.n1 == priors.n0 + len(short) - 1
    assert posterior.gamma1 > 0
    assert posterior.s1 > 0


def test_sample_omega(short, start, params, rng):
    updated = mcmc.sample_omega(start, short, params, Priors(), rng)
    assert updated.conditional_variance > 0
    assert updated.phi == params.phi


@pytest.fixture
def nu_target(params, rng):
    lam = rng.gamma(params.nu1 / 2, 2 / params.nu2, size=200)
    return mcmc.NuTarget.from_state(LatentState(np.ones(200), lam), Priors())


def test_nu_gradient_matches_differences(nu_target):
    u = np.log([15.0, 25.0])
    step = 1e-6
    for i in range(2):
        shift = np.zeros(2)
        shift[i] = step
        numeric = (nu_target.log_density(u + shift) - nu_target.log_density(u - shift)) / (
            2 * step
        )
        assert nu_target.gradient(u)[i] == pytest.approx(numeric, rel=1e-5, abs=1e-4)


def test_nu_hessian_matches_differences(nu_target):
    u = np.log([15.0, 25.0])
    step = 1e-6
    for i in range(2):
        shift = np.zeros(2)
        shift[i] = step
        numeric = (nu_target.gradient(u + shift) - nu_target.gradient(u - shift)) / (2 * step)
        assert nu_target.hessian(u)[:, i] == pytest.approx(numeric, rel=1e-4, abs=1e-3)


def test_nu_proposal_at_mode(nu_target):
    mean, covariance, fallback = mcmc.nu_proposal(nu_target, np.log([20.0, 20.0]))
    assert not fallback
    assert np.all(np.linalg.eigvalsh(covariance) > 0)
    assert np.allclose(nu_target.gradient(mean), 0.0, atol=1e-3)


def test_sample_nu(start, params, rng):
    updated, fallback = mcmc.sample_nu(start, params, Priors(), rng)
    assert updated.nu1 > 0 and updated.nu2 > 0
    assert fallback in (True, False)


@pytest.fixture
def failing_mode_search(monkeypatch):
    def fail(fun, x0, **kwargs):
        return SimpleNamespace(success=False, x=np.asarray(x0))

    monkeypatch.setattr(mcmc.optimize, "minimize", fail)


def test_nu_proposal_expands_at_current_point(nu_target, failing_mode_search):
    u = np.log([15.0, 25.0])
    mean, covariance, fallback = mcmc.nu_proposal(nu_target, u)
    assert fallback
    assert np.allclose(mean, u + covariance @ nu_target.gradient(u))


def test_nu_log_ratio_rebuilds_reverse_proposal(nu_target, failing_mode_search):
    u, v = np.log([15.0, 25.0]), np.log([17.0, 24.0])
    forward_mean, forward_covariance, _ = mcmc.nu_proposal(nu_target, u)
    reverse_mean, reverse_covariance, _ = mcmc.nu_proposal(nu_target, v)
    assert not np.allclose(forward_mean, reverse_mean)
    expected = (
        nu_target.log_density(v)
        - nu_target.log_density(u)
        + multivariate_normal.logpdf(u, reverse_mean, reverse_covariance)
        - multivariate_normal.logpdf(v, forward_mean, forward_covariance)
    )
    assert mcmc.nu_log_ratio(nu_target, u, v) == pytest.approx(expected)
    assert mcmc.nu_log_ratio(nu_target, u, v) == pytest.approx(
        -mcmc.nu_log_ratio(nu_target, v, u)
    )


def test_sample_nu_without_mode_search_keeps_target(params, rng, failing_mode_search):
    lam = rng.gamma(params.nu1 / 2, 2 / params.nu2, size=200)
    state = LatentState(np.ones(200), lam)
    target = mcmc.NuTarget.from_state(state, Priors())

    center = np.log([params.nu1, params.nu2])
    spread = np.sqrt(np.diag(np.linalg.inv(-target.hessian(center))))
    axes = [np.linspace(c - 8 * s, c + 8 * s, 161) for c, s in zip(center, spread)]
    log_density = np.array(
        [[target.log_density(np.array([a, b])) for b in axes[1]] for a in axes[0]]
    )
    weights = np.exp(log_density - log_density.max())
    weights /= weights.sum()
    grid_means = [np.sum(weights.sum(axis=1) * axes[0]), np.sum(weights.sum(axis=0) * axes[1])]

    current = params
    chain = np.empty((4000, 2))
    for i in range(len(chain)):
        current, fallback = mcmc.sample_nu(state, current, Priors(), rng)
        assert fallback
        chain[i] = np.log([current.nu1, current.nu2])
    for column, grid_mean in zip(chain.T, grid_means):
        error = math.sqrt(inefficiency_factor(column) * column.var() / len(column))
        assert abs(column.mean() - grid_mean) < 4 * error


def test_run_mcmc(short):
    draws = mcmc.run_mcmc(short, config=TINY_RUN)
    assert len(draws) == 8
    assert set(draws.acceptance) == set(mcmc.BLOCKS)
    assert np.all(np.abs(draws.phi) < 1)
    assert np.all(draws.omega_nn > draws.omega_en ** 2)
    assert np.all(draws.sigma2_next > 0)
    assert draws.predictive_mean == pytest.approx(np.mean(draws.sigma2_next))
    assert draws.latent_bands() is None


def test_run_mcmc_is_deterministic(short):
    first = mcmc.run_mcmc(short, config=TINY_RUN)
    second = mcmc.run_mcmc(short, config=TINY_RUN)
    for name, values in first.columns().items():
        assert np.array_equal(values, second.columns()[name]), name


def test_run_mcmc_thin_and_latent(short):
    draws = mcmc.run_mcmc(short, config=TINY_RUN.evolve(thin=2, keep_latent=True, n_draws=4))
    assert len(draws) == 4
    assert draws.sigma2_paths.shape == (4, len(short))
    bands = draws.latent_bands()
    assert np.all(bands["sigma_lower"] <= bands["sigma_upper"])
    assert np.all(bands["lambda_mean"] > 0)


def test_run_mcmc_rejects_single_day(short):
    with pytest.raises(DomainError):
        mcmc.run_mcmc(short.window(0, 1), config=TINY_RUN)


def test_report(short):
    draws = mcmc.run_mcmc(short, config=TINY_RUN)
    names = [summary.name for summary in draws.summary()]
    assert names == list(mcmc.COLUMNS) + ["rho"]
    text = draws.report("chain 0").render()
    assert text.startswith("chain 0\n")
    assert "sigma2" in text


def test_chain_rng_streams_differ():
    assert mcmc.chain_rng(1, 0).random() != mcmc.chain_rng(1, 1).random()
    assert mcmc.chain_rng(1, 2).random() == mcmc.chain_rng(1, 2).random()


def test_run_chains(short):
    chains = mcmc.run_chains(short, config=TINY_RUN, n_chains=2)
    assert len(chains) == 2
    assert not np.array_equal(chains[0].phi, chains[1].phi)
    again = mcmc.run_chains(short, config=TINY_RUN, n_chains=2, workers=1)
    assert np.array_equal(chains[1].phi, again[1].phi)


def test_run_chains_rejects_zero(short):
    with pytest.raises(DomainError):
        mcmc.run_chains(short, n_chains=0)
