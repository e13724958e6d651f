"""One-day-ahead predictive laws of the log variance."""
import math
from typing import Tuple

import numpy as np

from .errors import DomainError
from .model import transition_mean
from .models import RsvParams, SvrgParams


def predictive_log_moments(
    params: SvrgParams, sigma2_n: float, y_n: float
) -> Tuple[float, float]:
    """Mean and variance of log σ²_(n+1) given the last day."""
    if not (math.isfinite(sigma2_n) and sigma2_n > 0):
        raise DomainError(f"sigma2_n must be finite and > 0, got {sigma2_n!r}")
    return transition_mean(y_n, sigma2_n, params), params.conditional_variance


def predictive_draw(
    params: SvrgParams, sigma2_n: float, y_n: float, rng: np.random.Generator
) -> float:
    """Draw σ²_(n+1) for one posterior draw of the parameters and σ²_n."""
    mean, variance = predictive_log_moments(params, sigma2_n, y_n)
    return math.exp(rng.normal(mean, math.sqrt(variance)))


def rsv_predictive_log_moments(
    params: RsvParams, alpha_n: float, y_n: float
) -> Tuple[float, float]:
    if not math.isfinite(alpha_n):
        raise DomainError(f"alpha_n must be finite, got {alpha_n!r}")
    mean = (
        (1.0 - params.phi) * params.mu
        + params.phi * alpha_n
        + params.omega_en * math.exp(-alpha_n / 2.0) * y_n
    )
    return mean, params.conditional_variance


def rsv_predictive_draw(
    params: RsvParams, alpha_n: float, y_n: float, rng: np.random.Generator
) -> float:
    """Draw the next log variance α_(n+1) of the realized SV benchmark."""
    mean, variance = rsv_predictive_log_moments(params, alpha_n, y_n)
    return float(rng.normal(mean, math.sqrt(variance)))
