"""
Conditional densities of the range-corrected stochastic volatility model and
its forward simulators.

Kernels drop the 2π constants. The transition kernels include the Jacobian
1/σ²_(t+1) of the log-normal law, so they are densities in σ², not log σ².
"""
import math
from logging import getLogger
from typing import Tuple

import numpy as np
from scipy import special

from .config import DEFAULT_C_TH
from .errors import DomainError
from .models import (
    LatentState,
    Priors,
    ReturnRangeSeries,
    RsvParams,
    SvrgParams,
)
from .rangedist import log_range_density, sample_range

logger = getLogger(__package__)

SIMULATION_START = np.datetime64("2000-01-03", "D")


def _check_variance(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


def log_return_kernel(y: float, sigma2: float) -> float:
    """log f(y_t | σ²_t)"""
    _check_variance("sigma2", sigma2)
    return -0.5 * math.log(sigma2) - y * y / (2.0 * sigma2)


def transition_mean(y: float, sigma2: float, params: SvrgParams) -> float:
    """Conditional mean of log σ²_(t+1) given y_t and σ²_t."""
    return params.phi * math.log(sigma2) + params.omega_en * y / math.sqrt(sigma2)


def log_transition_kernel(
    sigma2_next: float, y: float, sigma2: float, params: SvrgParams
) -> float:
    """log f(σ²_(t+1) | y_t, σ²_t)"""
    _check_variance("sigma2_next", sigma2_next)
    _check_variance("sigma2", sigma2)
    h_next = math.log(sigma2_next)
    residual = h_next - transition_mean(y, sigma2, params)
    precision = params.precision_nn
    return -h_next + 0.5 * math.log(precision) - 0.5 * precision * residual ** 2


def log_initial_kernel(sigma2: float, params: SvrgParams) -> float:
    """log f(σ²_1), the stationary law of the first day."""
    _check_variance("sigma2", sigma2)
    h = math.log(sigma2)
    variance = params.stationary_variance
    return -h - 0.5 * math.log(variance) - h * h / (2.0 * variance)


def log_return_kernel_tilde(y: float, sigma2_tilde: float, lam: float) -> float:
    _check_variance("lambda", lam)
    return log_return_kernel(y, sigma2_tilde / lam)


def log_transition_kernel_tilde(
    sigma2_tilde_next: float,
    lam_next: float,
    y: float,
    sigma2_tilde: float,
    lam: float,
    params: SvrgParams,
) -> float:
    """log f(σ̃²_(t+1) | y_t, σ̃²_t, λ_t, λ_(t+1))"""
    _check_variance("lambda", lam)
    _check_variance("lambda_next", lam_next)
    _check_variance("sigma2_tilde_next", sigma2_tilde_next)
    _check_variance("sigma2_tilde", sigma2_tilde)
    residual = (
        math.log(sigma2_tilde_next)
        - math.log(lam_next)
        - params.phi * (math.log(sigma2_tilde) - math.log(lam))
        - params.omega_en * y * math.sqrt(lam / sigma2_tilde)
    )
    precision = params.precision_nn
    return (
        -math.log(sigma2_tilde_next)
        + 0.5 * math.log(precision)
        - 0.5 * precision * residual ** 2
    )


def log_initial_kernel_tilde(
    sigma2_tilde: float, lam: float, params: SvrgParams
) -> float:
    _check_variance("lambda", lam)
    return log_initial_kernel(sigma2_tilde / lam, params) - math.log(lam)


def log_lambda_density(lam: float, params: SvrgParams) -> float:
    """log of the G(ν₁/2, ν₂/2) density of a bias scale."""
    _check_variance("lambda", lam)
    shape, rate = params.nu1 / 2.0, params.nu2 / 2.0
    return (
        shape * math.log(rate)
        - float(special.gammaln(shape))
        + (shape - 1.0) * math.log(lam)
        - rate * lam
    )


def log_range_likelihood(r: float, sigma2: float, lam: float, c_th: float = DEFAULT_C_TH) -> float:
    """log f(r_t | σ̃²_t): the observed range is √λ_t times a true range."""
    return log_range_density(r, lam * sigma2, c_th=c_th)


def log_joint_posterior(
    data: ReturnRangeSeries,
    state: LatentState,
    params: SvrgParams,
    priors: Priors,
    c_th: float = DEFAULT_C_TH,
) -> float:
    """Unnormalized log posterior of (σ², λ, φ, Ω, ν) given returns and ranges."""
    if len(state) != len(data):
        raise DomainError("latent state and data lengths differ")
    total = priors.log_density(params)
    total += log_initial_kernel(float(state.sigma2[0]), params)
    for t in range(len(data)):
        sigma2, lam, y = float(state.sigma2[t]), float(state.lam[t]), float(data.y[t])
        total += log_return_kernel(y, sigma2)
        total += log_range_likelihood(float(data.r[t]), sigma2, lam, c_th)
        total += log_lambda_density(lam, params)
        if t + 1 < len(data):
            total += log_transition_kernel(float(state.sigma2[t + 1]), y, sigma2, params)
    return total


def _shocks(
    omega_en: float, conditional_variance: float, n: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    eps = rng.standard_normal(n)
    eta = omega_en * eps + math.sqrt(conditional_variance) * rng.standard_normal(n)
    return eps, eta


def simulate_svrg(
    params: SvrgParams,
    n: int,
    rng: np.random.Generator,
    c_th: float = DEFAULT_C_TH,
) -> Tuple[ReturnRangeSeries, LatentState]:
    """
    Simulate n days of returns and observed ranges with the latent path that
    produced them. Dates are consecutive calendar days from 2000-01-03.
    """
    if n < 2:
        raise DomainError(f"need at least 2 days, got {n!r}")
    eps, eta = _shocks(params.omega_en, params.conditional_variance, n, rng)
    h = np.empty(n)
    h[0] = rng.normal(0.0, math.sqrt(params.stationary_variance))
    for t in range(n - 1):
        h[t + 1] = params.phi * h[t] + eta[t]
    sigma2 = np.exp(h)
    y = np.sqrt(sigma2) * eps
    lam = rng.gamma(params.nu1 / 2.0, 2.0 / params.nu2, size=n)
    r = np.array([math.sqrt(lam[t]) * sample_range(sigma2[t], rng, c_th) for t in range(n)])
    dates = SIMULATION_START + np.arange(n)
    return ReturnRangeSeries(dates, y, r), LatentState(sigma2, lam)


def simulate_rsv(
    params: RsvParams, n: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Simulate the realized stochastic volatility model: returns, log realized
    measures x_t = ξ + α_t + u_t, and the latent log variances α_t.
    """
    if n < 2:
        raise DomainError(f"need at least 2 days, got {n!r}")
    eps, eta = _shocks(params.omega_en, params.conditional_variance, n, rng)
    alpha = np.empty(n)
    alpha[0] = rng.normal(params.mu, math.sqrt(params.omega_nn / (1.0 - params.phi ** 2)))
    for t in range(n - 1):
        alpha[t + 1] = params.mu + params.phi * (alpha[t] - params.mu) + eta[t]
    y = np.exp(alpha / 2.0) * eps
    x = params.xi + alpha + rng.normal(0.0, math.sqrt(params.omega_ww), size=n)
    return y, x, alpha
