"""Chain diagnostics and the plain-text run report."""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np
from statsmodels.tsa.stattools import acf

from .errors import DomainError

MIN_CHAIN_LENGTH = 100


def parzen_weights(bandwidth: int) -> np.ndarray:
    """Parzen lag window evaluated at k/bandwidth for k = 1..bandwidth."""
    z = np.arange(1, bandwidth + 1) / bandwidth
    return np.where(z <= 0.5, 1.0 - 6.0 * z ** 2 + 6.0 * z ** 3, 2.0 * (1.0 - z) ** 3)


def inefficiency_factor(draws: np.ndarray) -> float:
    """
    1 + 2 Σ w_k ρ(k) over lags k ≤ K = ⌊2√n⌋ with Parzen weights w_k.

    A value near 1 means the draws are nearly independent; the effective
    sample size is n divided by the factor.
    """
    series = np.asarray(draws, dtype=float)
    if series.ndim != 1 or len(series) < MIN_CHAIN_LENGTH:
        raise DomainError(f"need a 1-d chain of at least {MIN_CHAIN_LENGTH} draws")
    if not np.all(np.isfinite(series)):
        raise DomainError("chain contains non-finite draws")
    if np.ptp(series) == 0:
        raise DomainError("inefficiency factor is undefined for a constant chain")
    bandwidth = min(int(2.0 * math.sqrt(len(series))), len(series) - 1)
    rho = acf(series, nlags=bandwidth, fft=True)
    return float(1.0 + 2.0 * np.sum(parzen_weights(bandwidth) * rho[1:]))


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    lower: float
    upper: float
    inefficiency: float

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def summarize(columns: Mapping[str, np.ndarray]) -> List[ParameterSummary]:
    """Posterior mean, 95% credible interval and inefficiency per column."""
    summaries = []
    for name, values in columns.items():
        lower, upper = np.percentile(values, [2.5, 97.5])
        try:
            inefficiency = inefficiency_factor(values)
        except DomainError:
            inefficiency = math.nan
        summaries.append(
            ParameterSummary(name, float(np.mean(values)), float(lower), float(upper), inefficiency)
        )
    return summaries


@dataclass(frozen=True)
class RunReport:
    n_burnin: int
    n_draws: int
    summaries: List[ParameterSummary]
    acceptance: Dict[str, float]
    stalls: Dict[str, int] = field(default_factory=dict)
    nu_fallbacks: int = 0
    title: Optional[str] = None

    def render(self) -> str:
        lines = []
        if self.title:
            lines.append(self.title)
        lines.append(f"burn-in: {self.n_burnin}  draws: {self.n_draws}")
        lines.append("")
        lines.append(f"{'parameter':<12}{'mean':>14}{'2.5%':>14}{'97.5%':>14}{'IF':>10}")
        for summary in self.summaries:
            lines.append(
                f"{summary.name:<12}{summary.mean:>14.6f}{summary.lower:>14.6f}"
                f"{summary.upper:>14.6f}{summary.inefficiency:>10.2f}"
            )
        lines.append("")
        lines.append(f"{'block':<12}{'acceptance':>14}{'stalls':>10}")
        for block, rate in self.acceptance.items():
            lines.append(f"{block:<12}{rate:>14.4f}{self.stalls.get(block, 0):>10d}")
        if self.nu_fallbacks:
            lines.append("")
            lines.append(f"nu mode search fell back {self.nu_fallbacks} times")
        return "\n".join(lines) + "\n"
