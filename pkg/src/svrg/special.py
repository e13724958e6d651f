"""
Special functions and random variate generators behind the MCMC proposals:
the upper incomplete gamma function, the incomplete Bessel function
K_ν(x, y) = ∫₁^∞ t^(-ν-1) exp(-x t - y/t) dt, (truncated) generalized inverse
Gaussian, truncated gamma and truncated normal samplers, and the log-normal
moment matches used to build independence proposals.
"""
import math
import sys
from logging import getLogger
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, optimize, special, stats

from .config import BESSEL_RTOL, MAX_REJECTION_TRIES, MIN_REGION_MASS
from .errors import ConvergenceError, DomainError, NumericalError, TruncationError
from .models import GigParams, MomentMatch

logger = getLogger(__package__)

Region = Tuple[float, float]

EPS = sys.float_info.epsilon
TINY = sys.float_info.min
LOG_MAX = math.log(sys.float_info.max)
ZTOL = math.sqrt(EPS)
CF_MAX_ITERATIONS = 1000
# below this regularized mass the inverse CDF loses its digits
MIN_INVERSION_MASS = 1e-12


def _check_shape(alpha: float, x: float) -> None:
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f"shape must be finite and > 0, got {alpha!r}")
    if not (math.isfinite(x) and x >= 0):
        raise DomainError(f"lower limit must be finite and >= 0, got {x!r}")


def _log_tail_continued_fraction(alpha: float, x: float) -> float:
    # modified Lentz evaluation of Γ(α, x) e^x x^-α
    b = x + 1.0 - alpha
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, CF_MAX_ITERATIONS + 1):
        an = -i * (i - alpha)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < EPS:
            return -x + alpha * math.log(x) + math.log(h)
    raise ConvergenceError(
        f"continued fraction for Γ({alpha!r}, {x!r}) did not converge",
        h,
        h,
        CF_MAX_ITERATIONS,
    )


def log_upper_incomplete_gamma(alpha: float, x: float) -> float:
    """log ∫ₓ^∞ t^(α-1) e^(-t) dt."""
    _check_shape(alpha, x)
    log_complete = float(special.gammaln(alpha))
    if x == 0:
        return log_complete
    regularized = float(special.gammaincc(alpha, x))
    if regularized > TINY:
        return log_complete + math.log(regularized)
    return _log_tail_continued_fraction(alpha, x)


def upper_incomplete_gamma(alpha: float, x: float) -> float:
    value = log_upper_incomplete_gamma(alpha, x)
    if value > LOG_MAX:
        raise NumericalError(f"Γ({alpha!r}, {x!r}) overflows a double")
    return math.exp(value)


def _check_bessel(nu: float, x: float, y: float) -> None:
    if not math.isfinite(nu):
        raise DomainError(f"order must be finite, got {nu!r}")
    if not (math.isfinite(x) and x >= 0 and math.isfinite(y) and y >= 0):
        raise DomainError(f"arguments must be finite and >= 0, got x={x!r}, y={y!r}")
    if x == 0 and nu <= 0:
        raise DomainError(f"K_{nu}(0, {y}) diverges: x = 0 needs nu > 0")


def log_incomplete_bessel_k(nu: float, x: float, y: float) -> float:
    """
    log K_ν(x, y), integrated as ∫₀¹ u^(ν-1) exp(-x/u - y u) du.

    The integrand is rescaled by its peak before quadrature, so arguments
    whose value under- or overflows a double still give a finite log.
    """
    _check_bessel(nu, x, y)
    if x == 0:
        if y == 0:
            return -math.log(nu)
        # ∫₀¹ u^(ν-1) e^(-y u) du = y^(-ν) γ(ν, y)
        return (
            -nu * math.log(y)
            + float(special.gammaln(nu))
            + math.log(float(special.gammainc(nu, y)))
        )
    nm1 = nu - 1.0
    if y > 0:
        peak = (nm1 + math.sqrt(nm1 * nm1 + 4.0 * x * y)) / (2.0 * y)
    elif nm1 < 0:
        peak = x / -nm1
    else:
        peak = 1.0
    peak = min(peak, 1.0)

    def log_integrand(u: float) -> float:
        return nm1 * math.log(u) - x / u - y * u

    shift = log_integrand(peak)

    def integrand(u: float) -> float:
        if u <= 0.0:
            return 0.0
        return math.exp(log_integrand(u) - shift)

    points = [peak] if 0.0 < peak < 1.0 else None
    value, _ = integrate.quad(
        integrand, 0.0, 1.0, points=points, epsabs=0.0, epsrel=BESSEL_RTOL, limit=200
    )
    if not value > 0:
        raise NumericalError(f"quadrature for K_{nu}({x}, {y}) returned {value!r}")
    return shift + math.log(value)


def incomplete_bessel_k(nu: float, x: float, y: float) -> float:
    value = log_incomplete_bessel_k(nu, x, y)
    if value > LOG_MAX:
        raise NumericalError(f"K_{nu}({x}, {y}) overflows a double")
    return math.exp(value)


def _region(region: Region, support_lo: float = 0.0) -> Region:
    lo, hi = float(region[0]), float(region[1])
    lo = max(lo, support_lo)
    if math.isnan(lo) or math.isnan(hi) or not lo < hi:
        raise TruncationError(f"empty truncation region ({lo!r}, {hi!r})", 0.0)
    return lo, hi


def log_gig_normalizer(params: GigParams) -> float:
    """log ∫₀^∞ x^(ν-1) exp{-(δ²/x + γ²x)/2} dx."""
    nu, delta, gamma = params.nu, params.delta, params.gamma
    if delta == 0:
        return float(special.gammaln(nu)) + nu * math.log(2.0 / gamma ** 2)
    if gamma == 0:
        return float(special.gammaln(-nu)) - nu * math.log(2.0 / delta ** 2)
    omega = delta * gamma
    return (
        math.log(2.0)
        + nu * math.log(delta / gamma)
        + math.log(float(special.kve(nu, omega)))
        - omega
    )


def log_gig_upper(params: GigParams, lo: float) -> float:
    """log ∫_lo^∞ x^(ν-1) exp{-(δ²/x + γ²x)/2} dx."""
    if lo <= 0:
        return log_gig_normalizer(params)
    if math.isinf(lo):
        return -math.inf
    return params.nu * math.log(lo) + log_incomplete_bessel_k(
        -params.nu, lo * params.gamma ** 2 / 2.0, params.delta ** 2 / (2.0 * lo)
    )


def gig_region_mass(params: GigParams, region: Region) -> float:
    """Probability the GIG law assigns to the region."""
    lo, hi = _region(region)
    log_lo = log_gig_upper(params, lo)
    log_hi = log_gig_upper(params, hi)
    return math.exp(log_lo - log_gig_normalizer(params)) * -math.expm1(log_hi - log_lo)


def _gig_bound(y: float, m: float, beta: float, lam: float) -> float:
    y2 = y * y
    g = 0.5 * beta * y2 * y
    g -= y2 * (0.5 * beta * m + lam + 1.0)
    g += y * ((lam - 1.0) * m - 0.5 * beta) + 0.5 * beta * m
    return g


def _draw_gig(params: GigParams, rng: np.random.Generator) -> float:
    lam = params.nu
    chi = params.delta ** 2
    psi = params.gamma ** 2
    if chi < ZTOL and lam > 0:
        return float(rng.gamma(lam, 2.0 / psi))
    if psi < ZTOL and lam < 0:
        return 1.0 / float(rng.gamma(-lam, 2.0 / chi))

    alpha = math.sqrt(chi / psi)
    beta = math.sqrt(chi * psi)
    lm1 = lam - 1.0
    root = math.sqrt(lm1 * lm1 + beta * beta)
    m = (lm1 + root) / beta if lm1 >= 0 else beta / (root - lm1)
    m1 = m + 1.0 / m

    upper = m
    while _gig_bound(upper, m, beta, lam) <= 0:
        upper *= 2.0
    y_minus = optimize.brentq(_gig_bound, 0.0, m, args=(m, beta, lam))
    y_plus = optimize.brentq(_gig_bound, m, upper, args=(m, beta, lam))

    a = (y_plus - m) * math.exp(
        0.5 * lm1 * math.log(y_plus / m) - 0.25 * beta * (y_plus + 1.0 / y_plus - m1)
    )
    b = (y_minus - m) * math.exp(
        0.5 * lm1 * math.log(y_minus / m) - 0.25 * beta * (y_minus + 1.0 / y_minus - m1)
    )
    c = -0.25 * beta * m1 + 0.5 * lm1 * math.log(m)

    while True:
        r1, r2 = rng.random(), rng.random()
        if r1 == 0.0:
            continue
        y = m + a * r2 / r1 + b * (1.0 - r2) / r1
        if y > 0.0 and -math.log(r1) >= -0.5 * lm1 * math.log(y) + 0.25 * beta * (
            y + 1.0 / y
        ) + c:
            return y * alpha


def sample_gig(
    params: GigParams, rng: np.random.Generator, region: Optional[Region] = None
) -> float:
    """
    Draw from GIG(ν, δ, γ) by ratio of uniforms; a region is honoured by
    rejection and must carry at least ``MIN_REGION_MASS`` of the law.
    """
    if region is None:
        return _draw_gig(params, rng)
    lo, hi = _region(region)
    mass = gig_region_mass(params, (lo, hi))
    if mass < MIN_REGION_MASS:
        raise TruncationError(
            f"GIG region ({lo:g}, {hi:g}) carries mass {mass:.3g}; "
            "use sample_gig_inverse_cdf",
            mass,
        )
    for _ in range(MAX_REJECTION_TRIES):
        x = _draw_gig(params, rng)
        if lo <= x < hi:
            return x
    raise TruncationError(f"no GIG draw landed in ({lo:g}, {hi:g})", mass)


def sample_gig_inverse_cdf(
    params: GigParams, rng: np.random.Generator, region: Region
) -> float:
    """Draw from a truncated GIG by solving for the quantile of a uniform."""
    lo, hi = _region(region)
    log_lo = log_gig_upper(params, lo)
    log_hi = log_gig_upper(params, hi)
    if log_lo == -math.inf:
        raise TruncationError(f"GIG region ({lo:g}, {hi:g}) carries no mass", 0.0)
    u = rng.random()
    target = log_lo + math.log1p(u * math.expm1(log_hi - log_lo))

    def excess(z: float) -> float:
        return log_gig_upper(params, z) - target

    right = hi
    if math.isinf(hi):
        right = max(2.0 * lo, 1.0)
        while excess(right) > 0:
            right *= 2.0
    if excess(right) >= 0:
        return right
    return float(optimize.brentq(excess, lo, right, xtol=TINY, rtol=4 * EPS))


def _sample_gamma_tail(
    shape: float, rate: float, lo: float, hi: float, rng: np.random.Generator
) -> float:
    # exponential envelope anchored at lo, valid where the density decreases
    if shape > 1:
        slope = rate - (shape - 1.0) / lo
    else:
        slope = rate
    width = hi - lo
    for _ in range(MAX_REJECTION_TRIES):
        u = rng.random()
        step = -math.log1p(u * math.expm1(-slope * width)) / slope
        x = lo + step
        log_accept = (shape - 1.0) * math.log(x / lo)
        if shape > 1:
            log_accept -= (rate - slope) * step
        if math.log(rng.random()) <= log_accept:
            return x
    raise TruncationError(f"gamma tail rejection failed on ({lo:g}, {hi:g})", 0.0)


def sample_truncated_gamma(
    shape: float, rate: float, region: Region, rng: np.random.Generator
) -> float:
    """
    Draw from G(shape, rate) restricted to the region, by inverting the
    regularized incomplete gamma function. Regions deep in the upper tail,
    where the regularized mass underflows, use exponential-envelope rejection.
    """
    if not (shape > 0 and rate > 0 and math.isfinite(shape) and math.isfinite(rate)):
        raise DomainError(f"gamma shape and rate must be > 0, got {shape!r}, {rate!r}")
    lo, hi = _region(region)
    z_lo, z_hi = lo * rate, hi * rate
    q_lo = float(special.gammaincc(shape, z_lo))
    q_hi = float(special.gammaincc(shape, z_hi)) if math.isfinite(z_hi) else 0.0
    u = rng.random()
    if q_lo <= 0.5:
        mass = q_lo - q_hi
        if mass > MIN_INVERSION_MASS * max(q_lo, TINY) and q_lo > TINY:
            z = float(special.gammainccinv(shape, q_lo - u * mass))
            return min(max(z / rate, lo), hi)
        if z_lo > shape - 1.0:
            return _sample_gamma_tail(shape, rate, lo, hi, rng)
        raise TruncationError(f"gamma region ({lo:g}, {hi:g}) carries no mass", mass)
    p_lo = float(special.gammainc(shape, z_lo))
    p_hi = 1.0 - q_hi if q_hi > 0.5 else float(special.gammainc(shape, z_hi))
    mass = p_hi - p_lo
    if not mass > 0:
        raise TruncationError(f"gamma region ({lo:g}, {hi:g}) carries no mass", mass)
    z = float(special.gammaincinv(shape, p_lo + u * mass))
    return min(max(z / rate, lo), hi)


def sample_truncated_normal(
    m: float, s: float, region: Region, rng: np.random.Generator
) -> float:
    """Draw from N(m, s), s being the variance, restricted to the region."""
    if not (math.isfinite(m) and math.isfinite(s) and s > 0):
        raise DomainError(f"normal mean must be finite and variance > 0, got {m!r}, {s!r}")
    lo, hi = _region(region, -math.inf)
    sd = math.sqrt(s)
    a, b = (lo - m) / sd, (hi - m) / sd
    return float(stats.truncnorm.rvs(a, b, loc=m, scale=sd, random_state=rng))


def _check_lognormal(m: float, s: float) -> float:
    if not math.isfinite(m):
        raise DomainError(f"log-scale mean must be finite, got {m!r}")
    if not (math.isfinite(s) and s > 0):
        raise DomainError(f"log-scale variance must be finite and > 0, got {s!r}")
    return math.expm1(s)


def lognormal_moments(m: float, s: float) -> Tuple[float, float]:
    """Mean and variance of LN(m, s)."""
    excess = _check_lognormal(m, s)
    return math.exp(m + s / 2.0), math.exp(2.0 * m + s) * excess


def match_lognormal_to_invgamma(m: float, s: float) -> MomentMatch:
    excess = _check_lognormal(m, s)
    return MomentMatch(
        m=m,
        s=s,
        alpha=1.0 / excess + 2.0,
        beta=math.exp(m + s / 2.0) * (1.0 / excess + 1.0),
    )


def match_lognormal_to_gamma(m: float, s: float) -> MomentMatch:
    excess = _check_lognormal(m, s)
    return MomentMatch(
        m=m, s=s, alpha=1.0 / excess, beta=math.exp(-m - s / 2.0) / excess
    )
