"""
Gibbs sampler with Metropolis–Hastings steps for the range-corrected
stochastic volatility model.

A sweep updates σ²_(1:n) site by site, then λ_(1:n) site by site holding
σ̃² = λσ² fixed, then φ, Ω and ν. Latent sites are proposed from moment
matched independence laws and corrected by an MH step, so every block
leaves the exact posterior invariant.
"""
import asyncio
import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, special
from scipy.stats import multivariate_normal

from .config import (
    GIG_REJECTION_MASS,
    INITIAL_OMEGA_EN,
    INITIAL_OMEGA_NN,
    INITIAL_PHI,
    NU_NEWTON_STEPS,
    Representation,
)
from .diagnostics import RunReport, summarize
from .errors import DomainError, NumericalError
from .model import (
    log_initial_kernel,
    log_initial_kernel_tilde,
    log_transition_kernel,
    log_transition_kernel_tilde,
)
from .models import (
    GigParams,
    LatentState,
    McmcConfig,
    MomentMatch,
    Priors,
    ReturnRangeSeries,
    SvrgParams,
)
from .pool import WorkerPool
from .predictive import predictive_draw
from .rangedist import FOUR_LOG_2, alternating_series_accept, parkinson_estimator
from .special import (
    log_gig_normalizer,
    log_gig_upper,
    log_upper_incomplete_gamma,
    match_lognormal_to_gamma,
    match_lognormal_to_invgamma,
    sample_gig,
    sample_gig_inverse_cdf,
    sample_truncated_gamma,
    sample_truncated_normal,
)

logger = getLogger(__package__)

BLOCKS = ("sigma2", "lambda", "phi", "omega", "nu")
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)
FALLBACK_NU_COVARIANCE = 0.01


@dataclass
class BlockStats:
    proposed: int = 0
    accepted: int = 0
    stalls: int = 0

    def record(self, accepted: bool):
        self.proposed += 1
        self.accepted += int(accepted)

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else math.nan


def new_stats() -> Dict[str, BlockStats]:
    return {name: BlockStats() for name in BLOCKS}


def _accept(log_ratio: float, rng: np.random.Generator) -> bool:
    return log_ratio >= 0 or math.log(rng.random()) < log_ratio


@dataclass(frozen=True)
class ProposalMoments:
    """
    Log-normal approximation LN(m, s) of the smooth factors of one site's
    conditional, combining the next-day term (linearized at ``c``) with the
    previous-day or stationary term.
    """

    m: float
    s: float
    c: float
    forward_precision: float
    forward_mean: float
    backward_precision: float
    backward_mean: float
    matched: MomentMatch


def _combine(
    c: float,
    forward_precision: float,
    forward_weighted: float,
    backward_precision: float,
    backward_mean: float,
    match,
) -> ProposalMoments:
    precision = forward_precision + backward_precision
    m = (forward_weighted + backward_precision * backward_mean) / precision
    s = 1.0 / precision
    forward_mean = forward_weighted / forward_precision if forward_precision else math.nan
    return ProposalMoments(
        m=m,
        s=s,
        c=c,
        forward_precision=forward_precision,
        forward_mean=forward_mean,
        backward_precision=backward_precision,
        backward_mean=backward_mean,
        matched=match(m, s),
    )


def sigma2_proposal_moments(
    t: int, state: LatentState, data: ReturnRangeSeries, params: SvrgParams
) -> ProposalMoments:
    """Moments for log σ²_t, expanding σ_t⁻¹ around the Parkinson estimate."""
    n = len(data)
    log_sigma2 = np.log(state.sigma2)
    y = float(data.y[t])
    c = math.log(float(data.r[t]) ** 2 / (FOUR_LOG_2 * float(state.lam[t])))
    scale = math.exp(-c / 2.0)
    precision = params.precision_nn

    forward_precision = forward_weighted = 0.0
    if t < n - 1:
        slope = params.phi - 0.5 * params.omega_en * scale * y
        intercept = params.omega_en * (1.0 + c / 2.0) * scale * y
        forward_precision = slope * slope * precision
        forward_weighted = slope * precision * (log_sigma2[t + 1] - intercept)

    if t == 0:
        backward_precision, backward_mean = 1.0 / params.stationary_variance, 0.0
    else:
        backward_precision = precision
        backward_mean = params.phi * log_sigma2[t - 1] + params.omega_en * float(
            data.y[t - 1]
        ) / math.sqrt(state.sigma2[t - 1])
    return _combine(
        c,
        forward_precision,
        forward_weighted,
        backward_precision,
        backward_mean,
        match_lognormal_to_invgamma,
    )


@dataclass(frozen=True)
class SigmaMixtureProposal:
    """
    Independence proposal for σ²_t: IG(nu_t1, delta_t1/2) on (0, threshold)
    and GIG(nu_t2, delta_t2, gamma_t2) on [threshold, ∞), mixed with weights
    proportional to exp(log_p) and exp(log_q).
    """

    nu_t1: float
    delta_t1: float
    nu_t2: float
    delta_t2: float
    gamma_t2: float
    log_p: float
    log_q: float
    threshold: float
    r_tilde: float
    gig_log_mass: float

    @property
    def p_weight(self) -> float:
        return 1.0 / (1.0 + math.exp(self.log_q - self.log_p))

    @property
    def gig(self) -> GigParams:
        return GigParams(self.nu_t2, self.delta_t2, self.gamma_t2)


def build_sigma_mixture(
    moments: ProposalMoments, y: float, r_tilde: float, latent_c_th: float
) -> SigmaMixtureProposal:
    alpha, beta = moments.matched.alpha, moments.matched.beta
    threshold = latent_c_th * r_tilde ** 2

    nu_t1 = alpha + 1.0
    delta_t1 = r_tilde ** 2 + y * y + 2.0 * beta
    log_p = (
        -HALF_LOG_2PI
        - nu_t1 * math.log(delta_t1 / 2.0)
        + log_upper_incomplete_gamma(nu_t1, delta_t1 / (2.0 * threshold))
    )

    nu_t2 = 1.5 - alpha
    delta_t2 = math.sqrt(y * y + 2.0 * beta)
    gamma_t2 = math.pi / r_tilde
    gig = GigParams(nu_t2, delta_t2, gamma_t2)
    log_upper = log_gig_upper(gig, threshold)
    log_q = 2.0 * math.log(math.pi) - 5.0 * math.log(r_tilde) + log_upper
    gig_log_mass = log_upper - log_gig_normalizer(gig)
    return SigmaMixtureProposal(
        nu_t1=nu_t1,
        delta_t1=delta_t1,
        nu_t2=nu_t2,
        delta_t2=delta_t2,
        gamma_t2=gamma_t2,
        log_p=log_p,
        log_q=log_q,
        threshold=threshold,
        r_tilde=r_tilde,
        gig_log_mass=gig_log_mass,
    )


def draw_sigma2_candidate(
    proposal: SigmaMixtureProposal, rng: np.random.Generator, max_retries: int
) -> Optional[float]:
    """
    Draw from the mixture restricted by the range likelihood: each branch
    draw is kept with the probability given by the alternating series at
    x = r̃²/σ². Returns None when every retry is rejected.
    """
    weight = proposal.p_weight
    region = (proposal.threshold, math.inf)
    for _ in range(max_retries):
        if rng.random() < weight:
            candidate = 1.0 / sample_truncated_gamma(
                proposal.nu_t1,
                proposal.delta_t1 / 2.0,
                (1.0 / proposal.threshold, math.inf),
                rng,
            )
            representation = Representation.series_a
        else:
            if proposal.gig_log_mass >= math.log(GIG_REJECTION_MASS):
                candidate = sample_gig(proposal.gig, rng, region)
            else:
                candidate = sample_gig_inverse_cdf(proposal.gig, rng, region)
            representation = Representation.series_b
        x = proposal.r_tilde ** 2 / candidate
        if alternating_series_accept(x, representation, rng.random()):
            return candidate
    return None


def log_g_sigma2(
    t: int, value: float, state: LatentState, data: ReturnRangeSeries, params: SvrgParams
) -> float:
    """Exact transition factors of the σ²_t conditional at σ²_t = value."""
    n = len(data)
    if t == 0:
        total = log_initial_kernel(value, params)
    else:
        total = log_transition_kernel(
            value, float(data.y[t - 1]), float(state.sigma2[t - 1]), params
        )
    if t < n - 1:
        total += log_transition_kernel(
            float(state.sigma2[t + 1]), float(data.y[t]), value, params
        )
    return total


def _log_invgamma_kernel(x: float, matched: MomentMatch) -> float:
    return -(matched.alpha + 1.0) * math.log(x) - matched.beta / x


def update_sigma2_site(
    t: int,
    state: LatentState,
    data: ReturnRangeSeries,
    params: SvrgParams,
    rng: np.random.Generator,
    config: McmcConfig,
    stats: BlockStats,
):
    moments = sigma2_proposal_moments(t, state, data, params)
    r_tilde = float(data.r[t]) / math.sqrt(float(state.lam[t]))
    proposal = build_sigma_mixture(moments, float(data.y[t]), r_tilde, config.latent_c_th)
    candidate = draw_sigma2_candidate(proposal, rng, config.max_retries)
    if candidate is None:
        stats.stalls += 1
        return
    current = float(state.sigma2[t])
    log_ratio = (
        log_g_sigma2(t, candidate, state, data, params)
        - log_g_sigma2(t, current, state, data, params)
        + _log_invgamma_kernel(current, moments.matched)
        - _log_invgamma_kernel(candidate, moments.matched)
    )
    accepted = _accept(log_ratio, rng)
    stats.record(accepted)
    if accepted:
        state.sigma2[t] = candidate


def sample_sigma2_block(
    state: LatentState,
    data: ReturnRangeSeries,
    params: SvrgParams,
    rng: np.random.Generator,
    config: McmcConfig = McmcConfig(),
    stats: Optional[BlockStats] = None,
) -> LatentState:
    """Update σ²_1, ..., σ²_n in turn; λ is untouched so σ̃² moves with σ²."""
    stats = stats if stats is not None else BlockStats()
    for t in range(len(data)):
        try:
            update_sigma2_site(t, state, data, params, rng, config, stats)
        except NumericalError:
            logger.warning("sigma2 site %d kept after a numerical failure", t, exc_info=True)
            stats.stalls += 1
    return state


def lambda_expansion_point(params: SvrgParams) -> float:
    """Log of the G(ν₁/2, ν₂/2) mode, or of its mean when there is no interior mode."""
    if params.nu1 > 2.0:
        return math.log((params.nu1 / 2.0 - 1.0) / (params.nu2 / 2.0))
    return math.log(params.nu1 / params.nu2)


def lambda_proposal_moments(
    t: int,
    sigma2_tilde: np.ndarray,
    lam: np.ndarray,
    data: ReturnRangeSeries,
    params: SvrgParams,
) -> ProposalMoments:
    """Moments for log λ_t with σ̃² fixed, expanding √λ_t around the prior mode."""
    n = len(data)
    log_tilde = np.log(sigma2_tilde)
    c = lambda_expansion_point(params)
    scale = math.exp(c / 2.0)
    precision = params.precision_nn

    forward_precision = forward_weighted = 0.0
    if t < n - 1:
        standardized = float(data.y[t]) / math.sqrt(sigma2_tilde[t])
        slope = params.phi - 0.5 * params.omega_en * scale * standardized
        offset = (
            log_tilde[t + 1]
            - math.log(lam[t + 1])
            - params.phi * log_tilde[t]
            - params.omega_en * (1.0 - c / 2.0) * scale * standardized
        )
        forward_precision = slope * slope * precision
        forward_weighted = -slope * precision * offset

    if t == 0:
        backward_precision, backward_mean = 1.0 / params.stationary_variance, log_tilde[0]
    else:
        backward_precision = precision
        backward_mean = (
            log_tilde[t]
            - params.phi * (log_tilde[t - 1] - math.log(lam[t - 1]))
            - params.omega_en
            * float(data.y[t - 1])
            * math.sqrt(lam[t - 1] / sigma2_tilde[t - 1])
        )
    return _combine(
        c,
        forward_precision,
        forward_weighted,
        backward_precision,
        backward_mean,
        match_lognormal_to_gamma,
    )


def log_g_lambda(
    t: int,
    value: float,
    sigma2_tilde: np.ndarray,
    lam: np.ndarray,
    data: ReturnRangeSeries,
    params: SvrgParams,
) -> float:
    """Exact transition factors of the λ_t conditional, over λ_t."""
    n = len(data)
    if t == 0:
        total = log_initial_kernel_tilde(float(sigma2_tilde[0]), value, params)
    else:
        total = log_transition_kernel_tilde(
            float(sigma2_tilde[t]),
            value,
            float(data.y[t - 1]),
            float(sigma2_tilde[t - 1]),
            float(lam[t - 1]),
            params,
        )
    if t < n - 1:
        total += log_transition_kernel_tilde(
            float(sigma2_tilde[t + 1]),
            float(lam[t + 1]),
            float(data.y[t]),
            float(sigma2_tilde[t]),
            value,
            params,
        )
    return total - math.log(value)


def _log_gamma_kernel(x: float, matched: MomentMatch) -> float:
    return (matched.alpha - 1.0) * math.log(x) - matched.beta * x


def lambda_proposal(
    moments: ProposalMoments, y: float, sigma2_tilde: float, params: SvrgParams
) -> Tuple[float, float]:
    """Shape and rate doubled: the proposal is G(α_t1/2, β_t1/2)."""
    alpha_t1 = params.nu1 + 1.0 + 2.0 * moments.matched.alpha
    beta_t1 = params.nu2 + y * y / sigma2_tilde + 2.0 * moments.matched.beta
    return alpha_t1, beta_t1


def sample_lambda_block(
    state: LatentState,
    data: ReturnRangeSeries,
    params: SvrgParams,
    rng: np.random.Generator,
    stats: Optional[BlockStats] = None,
) -> LatentState:
    """Update λ_1, ..., λ_n in turn keeping σ̃² fixed; σ² follows as σ̃²/λ."""
    stats = stats if stats is not None else BlockStats()
    sigma2_tilde = state.sigma2_tilde
    lam = state.lam
    for t in range(len(data)):
        moments = lambda_proposal_moments(t, sigma2_tilde, lam, data, params)
        alpha_t1, beta_t1 = lambda_proposal(
            moments, float(data.y[t]), float(sigma2_tilde[t]), params
        )
        candidate = float(rng.gamma(alpha_t1 / 2.0, 2.0 / beta_t1))
        if not candidate > 0:
            stats.stalls += 1
            continue
        current = float(lam[t])
        log_ratio = (
            log_g_lambda(t, candidate, sigma2_tilde, lam, data, params)
            - log_g_lambda(t, current, sigma2_tilde, lam, data, params)
            + _log_gamma_kernel(current, moments.matched)
            - _log_gamma_kernel(candidate, moments.matched)
        )
        accepted = _accept(log_ratio, rng)
        stats.record(accepted)
        if accepted:
            lam[t] = candidate
    state.sigma2[:] = sigma2_tilde / lam
    return state


def phi_proposal_moments(
    state: LatentState, data: ReturnRangeSeries, params: SvrgParams
) -> Tuple[float, float]:
    """Mean and variance of the normal proposal for φ."""
    h = np.log(state.sigma2)
    leverage = params.omega_en * data.y[:-1] / np.sqrt(state.sigma2[:-1])
    precision = params.precision_nn
    spread = float(np.sum(h[:-1] ** 2))
    if not (math.isfinite(spread) and spread > 0):
        raise NumericalError(f"phi proposal is undefined when Σ log² σ² = {spread!r}")
    s = 1.0 / (precision * spread)
    m = s * precision * float(np.sum((h[1:] - leverage) * h[:-1]))
    return m, s


def _log_g_phi(phi: float, state: LatentState, params: SvrgParams, priors: Priors) -> float:
    return priors.log_phi_density(phi) + log_initial_kernel(
        float(state.sigma2[0]), params.evolve(phi=phi)
    )


def sample_phi(
    state: LatentState,
    data: ReturnRangeSeries,
    params: SvrgParams,
    priors: Priors,
    rng: np.random.Generator,
    stats: Optional[BlockStats] = None,
) -> SvrgParams:
    if len(data) < 2:
        raise DomainError("the phi block needs at least 2 days")
    stats = stats if stats is not None else BlockStats()
    try:
        m, s = phi_proposal_moments(state, data, params)
    except NumericalError:
        logger.warning("phi kept after a numerical failure", exc_info=True)
        stats.stalls += 1
        return params
    candidate = sample_truncated_normal(m, s, (-1.0, 1.0), rng)
    if not -1.0 < candidate < 1.0:
        stats.stalls += 1
        return params
    log_ratio = _log_g_phi(candidate, state, params, priors) - _log_g_phi(
        params.phi, state, params, priors
    )
    accepted = _accept(log_ratio, rng)
    stats.record(accepted)
    return params.evolve(phi=candidate) if accepted else params


@dataclass(frozen=True)
class OmegaPosterior:
    """Updated hyper-parameters of the (εη) and (ηη) precision entries."""

    n1: float
    s1: float
    gamma1: float
    delta1: float


def omega_posterior(
    state: LatentState, data: ReturnRangeSeries, params: SvrgParams, priors: Priors
) -> OmegaPosterior:
    h = np.log(state.sigma2)
    standardized = data.y[:-1] / np.sqrt(state.sigma2[:-1])
    eta = h[1:] - params.phi * h[:-1]
    xi11 = float(np.sum(standardized ** 2))
    xi12 = float(np.sum(standardized * eta))
    xi22 = float(np.sum(eta ** 2))
    gamma1 = 1.0 / (1.0 / priors.gamma0 + xi11)
    delta1 = (priors.delta0 / priors.gamma0 - xi12) * gamma1
    s1 = 1.0 / (
        1.0 / priors.s0
        + xi22
        + priors.delta0 ** 2 / priors.gamma0
        - delta1 ** 2 / gamma1
    )
    return OmegaPosterior(n1=priors.n0 + len(data) - 1, s1=s1, gamma1=gamma1, delta1=delta1)


def sample_omega(
    state: LatentState,
    data: ReturnRangeSeries,
    params: SvrgParams,
    priors: Priors,
    rng: np.random.Generator,
    stats: Optional[BlockStats] = None,
) -> SvrgParams:
    if len(data) < 2:
        raise DomainError("the Omega block needs at least 2 days")
    stats = stats if stats is not None else BlockStats()
    posterior = omega_posterior(state, data, params, priors)
    precision_nn = float(rng.gamma(posterior.n1 / 2.0, 2.0 * posterior.s1))
    precision_en = float(
        rng.normal(
            precision_nn * posterior.delta1, math.sqrt(posterior.gamma1 * precision_nn)
        )
    )
    try:
        candidate = SvrgParams.from_precision(
            params.phi, precision_en, precision_nn, params.nu1, params.nu2
        )
    except DomainError:
        stats.stalls += 1
        return params
    sigma2_first = float(state.sigma2[0])
    log_ratio = log_initial_kernel(sigma2_first, candidate) - log_initial_kernel(
        sigma2_first, params
    )
    accepted = _accept(log_ratio, rng)
    stats.record(accepted)
    return candidate if accepted else params


@dataclass(frozen=True)
class NuTarget:
    """Log conditional of u = (log ν₁, log ν₂) given the bias scales."""

    n: int
    sum_log_lambda: float
    sum_lambda: float
    priors: Priors

    @classmethod
    def from_state(cls, state: LatentState, priors: Priors) -> "NuTarget":
        return cls(
            len(state),
            float(np.sum(np.log(state.lam))),
            float(np.sum(state.lam)),
            priors,
        )

    def log_density(self, u: np.ndarray) -> float:
        nu1, nu2 = math.exp(u[0]), math.exp(u[1])
        p = self.priors
        return (
            p.alpha_nu1 / 2.0 * u[0]
            - p.beta_nu1 / 2.0 * nu1
            + p.alpha_nu2 / 2.0 * u[1]
            - p.beta_nu2 / 2.0 * nu2
            + self.n * nu1 / 2.0 * (u[1] - LOG_2)
            - self.n * float(special.gammaln(nu1 / 2.0))
            + nu1 / 2.0 * self.sum_log_lambda
            - nu2 / 2.0 * self.sum_lambda
        )

    def gradient(self, u: np.ndarray) -> np.ndarray:
        nu1, nu2 = math.exp(u[0]), math.exp(u[1])
        p = self.priors
        half = nu1 / 2.0
        return np.array(
            [
                p.alpha_nu1 / 2.0
                - p.beta_nu1 * half
                + self.n * half * (u[1] - LOG_2)
                - self.n * float(special.digamma(half)) * half
                + half * self.sum_log_lambda,
                p.alpha_nu2 / 2.0
                - p.beta_nu2 * nu2 / 2.0
                + self.n * half
                - nu2 / 2.0 * self.sum_lambda,
            ]
        )

    def hessian(self, u: np.ndarray) -> np.ndarray:
        nu1, nu2 = math.exp(u[0]), math.exp(u[1])
        p = self.priors
        half = nu1 / 2.0
        h11 = (
            -p.beta_nu1 * half
            + self.n * half * (u[1] - LOG_2)
            - self.n
            * (
                float(special.digamma(half)) * half
                + float(special.polygamma(1, half)) * half * half
            )
            + half * self.sum_log_lambda
        )
        h12 = self.n * half
        h22 = -p.beta_nu2 * nu2 / 2.0 - nu2 / 2.0 * self.sum_lambda
        return np.array([[h11, h12], [h12, h22]])


def _is_negative_definite(matrix: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvalsh(matrix) < 0))


def _expand(target: NuTarget, center: np.ndarray) -> Tuple[np.ndarray, np.ndarray, bool]:
    hessian = target.hessian(center)
    if _is_negative_definite(hessian):
        covariance = np.linalg.inv(-hessian)
        curved = True
    else:
        covariance = FALLBACK_NU_COVARIANCE * np.eye(2)
        curved = False
    return center + covariance @ target.gradient(center), covariance, curved


def nu_proposal(target: NuTarget, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, bool]:
    """
    Gaussian proposal N(û + S∇ℓ(û), S) with S = (-∇²ℓ(û))⁻¹ at the mode û.
    Falls back to expanding at the current point when the mode search fails;
    the flag reports that.
    """
    try:
        result = optimize.minimize(
            lambda v: -target.log_density(v),
            u,
            jac=lambda v: -target.gradient(v),
            hess=lambda v: -target.hessian(v),
            method="trust-exact",
            options={"maxiter": NU_NEWTON_STEPS},
        )
        fallback = not (result.success and np.all(np.isfinite(result.x)))
    except (OverflowError, np.linalg.LinAlgError):
        fallback = True
    mean, covariance, curved = _expand(target, u if fallback else result.x)
    return mean, covariance, fallback or not curved


def nu_log_ratio(
    target: NuTarget,
    u: np.ndarray,
    candidate: np.ndarray,
    forward: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> float:
    """
    MH log ratio for a move u → candidate. The proposal depends on the point
    it is built from, so the reverse density is rebuilt at the candidate.
    """
    if forward is None:
        forward = nu_proposal(target, u)[:2]
    reverse_mean, reverse_covariance, _ = nu_proposal(target, candidate)
    return (
        target.log_density(candidate)
        - target.log_density(u)
        + float(multivariate_normal.logpdf(u, reverse_mean, reverse_covariance))
        - float(multivariate_normal.logpdf(candidate, *forward))
    )


def sample_nu(
    state: LatentState,
    params: SvrgParams,
    priors: Priors,
    rng: np.random.Generator,
    stats: Optional[BlockStats] = None,
) -> Tuple[SvrgParams, bool]:
    """MH update of (ν₁, ν₂); also returns whether the mode search fell back."""
    stats = stats if stats is not None else BlockStats()
    target = NuTarget.from_state(state, priors)
    u = np.log([params.nu1, params.nu2])
    mean, covariance, fallback = nu_proposal(target, u)
    if fallback:
        logger.warning("nu mode search failed, expanding at the current point")
    candidate = rng.multivariate_normal(mean, covariance)
    try:
        log_ratio = nu_log_ratio(target, u, candidate, (mean, covariance))
    except (OverflowError, np.linalg.LinAlgError):
        log_ratio = -math.inf
    accepted = math.isfinite(log_ratio) and _accept(log_ratio, rng)
    stats.record(accepted)
    if not accepted:
        return params, fallback
    nu1, nu2 = np.exp(candidate)
    return params.evolve(nu1=float(nu1), nu2=float(nu2)), fallback


def initial_state(data: ReturnRangeSeries) -> LatentState:
    return LatentState(parkinson_estimator(data.r), np.ones(len(data)))


def initial_params(priors: Priors) -> SvrgParams:
    nu1, nu2 = priors.nu_means
    return SvrgParams(
        phi=INITIAL_PHI,
        omega_en=INITIAL_OMEGA_EN,
        omega_nn=INITIAL_OMEGA_NN,
        nu1=nu1,
        nu2=nu2,
    )


COLUMNS = ("phi", "omega_en", "omega_nn", "nu1", "nu2", "sigma2_next")


@dataclass
class PosteriorDraws:
    """Stored iterations of one chain, after burn-in and thinning."""

    phi: np.ndarray
    omega_en: np.ndarray
    omega_nn: np.ndarray
    nu1: np.ndarray
    nu2: np.ndarray
    sigma2_next: np.ndarray
    n_burnin: int
    acceptance: Dict[str, float] = field(default_factory=dict)
    stalls: Dict[str, int] = field(default_factory=dict)
    nu_fallbacks: int = 0
    sigma2_paths: Optional[np.ndarray] = None
    lambda_paths: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.phi)

    def columns(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in COLUMNS}

    @property
    def correlation(self) -> np.ndarray:
        return self.omega_en / np.sqrt(self.omega_nn)

    @property
    def predictive_mean(self) -> float:
        """Point forecast of σ²_(n+1): the posterior predictive mean."""
        return float(np.mean(self.sigma2_next))

    def params(self, i: int) -> SvrgParams:
        return SvrgParams(
            phi=self.phi[i],
            omega_en=self.omega_en[i],
            omega_nn=self.omega_nn[i],
            nu1=self.nu1[i],
            nu2=self.nu2[i],
        )

    def summary(self):
        columns = self.columns()
        columns["rho"] = self.correlation
        return summarize(columns)

    def latent_bands(self) -> Optional[Dict[str, np.ndarray]]:
        """Posterior mean and 95% band of σ_t and λ_t, when paths were kept."""
        if self.sigma2_paths is None or self.lambda_paths is None:
            return None
        sigma = np.sqrt(self.sigma2_paths)
        bands = {}
        for name, paths in (("sigma", sigma), ("lambda", self.lambda_paths)):
            lower, upper = np.percentile(paths, [2.5, 97.5], axis=0)
            bands[f"{name}_mean"] = paths.mean(axis=0)
            bands[f"{name}_lower"] = lower
            bands[f"{name}_upper"] = upper
        return bands

    def report(self, title: Optional[str] = None) -> RunReport:
        return RunReport(
            n_burnin=self.n_burnin,
            n_draws=len(self),
            summaries=self.summary(),
            acceptance=dict(self.acceptance),
            stalls=dict(self.stalls),
            nu_fallbacks=self.nu_fallbacks,
            title=title,
        )


def run_mcmc(
    data: ReturnRangeSeries,
    priors: Priors = Priors(),
    config: McmcConfig = McmcConfig(),
    rng: Optional[np.random.Generator] = None,
) -> PosteriorDraws:
    """
    Run one chain: burn-in, then ``n_draws`` stored iterations spaced
    ``thin`` sweeps apart. Each stored iteration also draws σ²_(n+1).
    """
    if len(data) < 2:
        raise DomainError("need at least 2 days of data")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    state = initial_state(data)
    params = initial_params(priors)
    stats = new_stats()
    fallbacks = 0

    n = len(data)
    stored = {name: np.empty(config.n_draws) for name in COLUMNS}
    sigma2_paths = np.empty((config.n_draws, n)) if config.keep_latent else None
    lambda_paths = np.empty((config.n_draws, n)) if config.keep_latent else None

    total = config.n_burnin + config.n_draws * config.thin
    for iteration in range(total):
        sample_sigma2_block(state, data, params, rng, config, stats["sigma2"])
        sample_lambda_block(state, data, params, rng, stats["lambda"])
        params = sample_phi(state, data, params, priors, rng, stats["phi"])
        params = sample_omega(state, data, params, priors, rng, stats["omega"])
        params, fallback = sample_nu(state, params, priors, rng, stats["nu"])
        fallbacks += fallback

        offset = iteration - config.n_burnin
        if offset >= 0 and offset % config.thin == 0:
            j = offset // config.thin
            stored["phi"][j] = params.phi
            stored["omega_en"][j] = params.omega_en
            stored["omega_nn"][j] = params.omega_nn
            stored["nu1"][j] = params.nu1
            stored["nu2"][j] = params.nu2
            stored["sigma2_next"][j] = predictive_draw(
                params, float(state.sigma2[-1]), float(data.y[-1]), rng
            )
            if sigma2_paths is not None and lambda_paths is not None:
                sigma2_paths[j] = state.sigma2
                lambda_paths[j] = state.lam

        if config.log_every and (iteration + 1) % config.log_every == 0:
            logger.info(
                "iteration %d/%d phi=%.4f omega_en=%.4f omega_nn=%.4f nu=(%.2f, %.2f)",
                iteration + 1,
                total,
                params.phi,
                params.omega_en,
                params.omega_nn,
                params.nu1,
                params.nu2,
            )

    stalls = {name: block.stalls for name, block in stats.items()}
    if any(stalls.values()):
        logger.warning("latent proposals stalled: %s", stalls)
    return PosteriorDraws(
        n_burnin=config.n_burnin,
        acceptance={name: block.rate for name, block in stats.items()},
        stalls=stalls,
        nu_fallbacks=fallbacks,
        sigma2_paths=sigma2_paths,
        lambda_paths=lambda_paths,
        **stored,
    )


def chain_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for chain or window `index` under a master seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _run_chain(
    data: ReturnRangeSeries, priors: Priors, config: McmcConfig, index: int
) -> PosteriorDraws:
    return run_mcmc(data, priors, config, chain_rng(config.seed, index))


async def _run_chains(
    data: ReturnRangeSeries,
    priors: Priors,
    config: McmcConfig,
    n_chains: int,
    workers: int,
    processes: bool,
) -> List[PosteriorDraws]:
    pool = await WorkerPool.create(workers, processes=processes)
    try:
        results = await pool.map(
            _run_chain, ((data, priors, config, i) for i in range(n_chains))
        )
    finally:
        await pool.close()
    for result in results:
        if isinstance(result, BaseException):
            raise result
    return [result for result in results if isinstance(result, PosteriorDraws)]


def run_chains(
    data: ReturnRangeSeries,
    priors: Priors = Priors(),
    config: McmcConfig = McmcConfig(),
    n_chains: int = 2,
    workers: Optional[int] = None,
    processes: bool = False,
) -> List[PosteriorDraws]:
    """Run independent chains concurrently; chain i uses seeds (seed, i)."""
    if n_chains < 1:
        raise DomainError(f"need at least one chain, got {n_chains!r}")
    return asyncio.run(
        _run_chains(data, priors, config, n_chains, workers or n_chains, processes)
    )
