"""
Density and exact sampler of the daily high-low range of a Brownian log price.

The density of x = r²/σ² is written as a leading kernel times an alternating
series 1 - a_1 + a_2 - ..., in two forms: ``series_a`` (a χ²₁ kernel, terms
decreasing for x > 4/3) and ``series_b`` (an inverse-gamma kernel, terms
decreasing for x < π²). Successive partial sums bracket the series, so the
density is evaluated and sampled exactly without summing to infinity.
"""
import math
from logging import getLogger
from typing import Iterator, Optional, Tuple, Union, overload

import numpy as np
from scipy import special

from .config import (
    DEFAULT_C_TH,
    DEFAULT_TOLERANCE,
    MAX_SERIES_TERMS,
    MIN_C_TH,
    Representation,
)
from .errors import ConvergenceError, DomainError
from .models import NormalizedRangeSq, RangeDensityEval
from .special import sample_truncated_gamma

logger = getLogger(__package__)

PI2 = math.pi ** 2
LOG_4 = math.log(4.0)
LOG_PI = math.log(math.pi)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
FOUR_LOG_2 = 4.0 * math.log(2.0)


def check_threshold(c_th: float) -> float:
    if not MIN_C_TH < c_th < PI2:
        raise DomainError(f"c_th must lie in (4/3, π²), got {c_th!r}")
    return c_th


def select_representation(x: float, c_th: float = DEFAULT_C_TH) -> Representation:
    return Representation.series_a if x > c_th else Representation.series_b


def log_leading_kernel(x: float, representation: Representation) -> float:
    """Log of the kernel multiplying the alternating series, as a density in x."""
    if representation is Representation.series_a:
        return LOG_4 - HALF_LOG_2PI - 0.5 * math.log(x) - 0.5 * x
    return LOG_4 + 2.0 * LOG_PI - 3.0 * math.log(x) - PI2 / (2.0 * x)


def log_range_term(k: int, x: float, representation: Representation) -> float:
    """log a_k, relative to the leading term."""
    if representation is Representation.series_a:
        j = k + 1
        return 2.0 * math.log(j) - (j * j - 1) * x / 2.0
    if k % 2 == 0:
        j = k + 1
        return 2.0 * math.log(j) - PI2 * (j * j - 1) / (2.0 * x)
    return math.log(x / PI2) - PI2 * (k * k - 1) / (2.0 * x)


def range_term(k: int, x: float, representation: Representation) -> float:
    """The k-th normalized term a_k, with a_0 = 1."""
    return math.exp(log_range_term(k, x, representation))


def range_terms(x: float, representation: Representation) -> Iterator[float]:
    k = 0
    while True:
        yield range_term(k, x, representation)
        k += 1


def mixture_weights(c_th: float = DEFAULT_C_TH) -> Tuple[float, float]:
    """
    Tail masses of the two proposal kernels: p = P(χ²₁ > c_th) and
    q = (4/π²)·P(G(2, 1) ≥ π²/(2 c_th)).
    """
    p = float(special.gammaincc(0.5, c_th / 2.0))
    q = 4.0 / PI2 * float(special.gammaincc(2.0, PI2 / (2.0 * c_th)))
    return p, q


def _brackets(
    x: float, representation: Representation, tol: float, max_terms: int
) -> Tuple[float, float, int]:
    total = 1.0
    lower, upper = -math.inf, 1.0
    for k in range(1, max_terms + 1):
        term = range_term(k, x, representation)
        if k % 2:
            total -= term
            lower = total
        else:
            total += term
            upper = total
        if term == 0.0 or (lower > 0 and term <= tol * lower):
            if term == 0.0:
                lower = upper = total
            return lower, upper, k + 1
    raise ConvergenceError(
        f"alternating series did not converge at x={x!r} "
        f"after {max_terms} terms",
        lower,
        upper,
        max_terms,
    )


def _normalize(r: float, sigma2: float) -> float:
    if not (math.isfinite(r) and r > 0):
        raise DomainError(f"range must be finite and > 0, got {r!r}")
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise DomainError(f"sigma2 must be finite and > 0, got {sigma2!r}")
    return r * r / sigma2


def range_density(
    r: float,
    sigma2: float,
    tol: float = DEFAULT_TOLERANCE,
    c_th: float = DEFAULT_C_TH,
    representation: Optional[Representation] = None,
    max_terms: int = MAX_SERIES_TERMS,
) -> RangeDensityEval:
    """
    Density of the range r of a day with variance sigma2.

    The representation defaults to the one whose terms decrease monotonically
    at x = r²/σ² (``series_b`` at x = c_th); passing one explicitly evaluates
    that series wherever it converges.
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol!r}")
    x = _normalize(r, sigma2)
    if representation is None:
        representation = select_representation(x, c_th)
    try:
        lower, upper, terms = _brackets(x, representation, tol, max_terms)
    except ConvergenceError as error:
        scale = math.exp(log_leading_kernel(x, representation)) * 2.0 * r / sigma2
        raise ConvergenceError(
            str(error), error.lower * scale, error.upper * scale, error.terms
        ) from None
    scale = math.exp(log_leading_kernel(x, representation)) * 2.0 * r / sigma2
    return RangeDensityEval(
        value=max(0.5 * (lower + upper) * scale, 0.0),
        lower_bracket=lower * scale,
        upper_bracket=upper * scale,
        terms_used=terms,
        representation=representation,
    )


def log_range_density(
    r: float,
    sigma2: float,
    tol: float = DEFAULT_TOLERANCE,
    c_th: float = DEFAULT_C_TH,
) -> float:
    """Log density of the range, computed without underflow in the tails."""
    x = _normalize(r, sigma2)
    representation = select_representation(x, c_th)
    lower, upper, _ = _brackets(x, representation, tol, MAX_SERIES_TERMS)
    return (
        log_leading_kernel(x, representation)
        + math.log(0.5 * (lower + upper))
        + math.log(2.0 * r / sigma2)
    )


def alternating_series_accept(
    x: float,
    representation: Representation,
    u: float,
    max_terms: int = MAX_SERIES_TERMS,
) -> bool:
    """
    Decide u ≤ 1 - a_1 + a_2 - ... using as few terms as needed: odd partial
    sums are lower bounds, even ones upper bounds.
    """
    if u > 1.0:
        return False
    total = 1.0
    for k in range(1, max_terms + 1):
        term = range_term(k, x, representation)
        if k % 2:
            total -= term
            if total >= u:
                return True
        else:
            total += term
            if total < u:
                return False
    raise ConvergenceError(
        f"accept/reject undecided at x={x!r} after {max_terms} terms",
        total,
        total,
        max_terms,
    )


def sample_normalized_range_sq(
    rng: np.random.Generator, c_th: float = DEFAULT_C_TH
) -> NormalizedRangeSq:
    """
    Exact draw of x = r²/σ².

    Proposes χ²₁ truncated to (c_th, ∞) or IG(2, π²/2) truncated to (0, c_th]
    in proportion to their kernel masses and accepts with the alternating
    series of the matching representation.
    """
    check_threshold(c_th)
    p, q = mixture_weights(c_th)
    weight = p / (p + q)
    while True:
        if rng.random() < weight:
            x = sample_truncated_gamma(0.5, 0.5, (c_th, math.inf), rng)
            representation = Representation.series_a
        else:
            x = 1.0 / sample_truncated_gamma(2.0, PI2 / 2.0, (1.0 / c_th, math.inf), rng)
            representation = Representation.series_b
        if alternating_series_accept(x, representation, rng.random()):
            return NormalizedRangeSq(x)


def sample_range(
    sigma2: float, rng: np.random.Generator, c_th: float = DEFAULT_C_TH
) -> float:
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise DomainError(f"sigma2 must be finite and > 0, got {sigma2!r}")
    return math.sqrt(sigma2 * sample_normalized_range_sq(rng, c_th).x)


def parkinson_moment(p: float, sigma2: float) -> float:
    """E[r^p] for a day with variance sigma2."""
    if not p > 0:
        raise DomainError(f"moment order must be > 0, got {p!r}")
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise DomainError(f"sigma2 must be finite and > 0, got {sigma2!r}")
    if abs(p - 2.0) < 1e-9:
        return FOUR_LOG_2 * sigma2
    return (
        4.0
        / math.sqrt(math.pi)
        * math.gamma((p + 1.0) / 2.0)
        * (1.0 - 4.0 / 2.0 ** p)
        * float(special.zeta(p - 1.0))
        * (2.0 * sigma2) ** (p / 2.0)
    )


@overload
def parkinson_estimator(r: float) -> float:
    ...


@overload
def parkinson_estimator(r: np.ndarray) -> np.ndarray:
    ...


def parkinson_estimator(r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    values = np.asarray(r, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise DomainError("ranges must be finite and >= 0")
    estimate = values ** 2 / FOUR_LOG_2
    return float(estimate) if estimate.ndim == 0 else estimate
