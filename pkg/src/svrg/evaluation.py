"""
Forecast evaluation: robust losses against noisy variance proxies, the
Hansen–Lunde proxy scaling and the Giacomini–White conditional predictive
ability test.
"""
import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .config import MIN_GW_LENGTH
from .errors import DomainError
from .forecast import ForecastRecord, forecast_means
from .models import ReturnRangeSeries
from .rangedist import parkinson_estimator

logger = getLogger(__package__)

LOSSES = ("MSE", "QLIKE")
GW_DOF = 2


def _pair(proxy, h) -> Tuple[np.ndarray, np.ndarray]:
    proxy, h = np.asarray(proxy, dtype=float), np.asarray(h, dtype=float)
    if proxy.shape != h.shape:
        raise DomainError(f"proxy and forecast shapes differ: {proxy.shape} != {h.shape}")
    return proxy, h


def mse_loss(proxy, h):
    """(h - proxy)²/2, elementwise."""
    proxy, h = _pair(proxy, h)
    if not (np.all(np.isfinite(proxy)) and np.all(np.isfinite(h))):
        raise DomainError("MSE needs finite proxies and forecasts")
    loss = (h - proxy) ** 2 / 2.0
    return float(loss) if loss.ndim == 0 else loss


def qlike_loss(proxy, h):
    """proxy/h - log(proxy/h) - 1, elementwise."""
    proxy, h = _pair(proxy, h)
    if not (np.all(proxy > 0) and np.all(h > 0)):
        raise DomainError("QLIKE needs strictly positive proxies and forecasts")
    ratio = proxy / h
    loss = ratio - np.log(ratio) - 1.0
    return float(loss) if loss.ndim == 0 else loss


LOSS_FUNCTIONS = {"MSE": mse_loss, "QLIKE": qlike_loss}


def hansen_lunde_scale(rv: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Rescale a proxy so its mean equals the sample variance of the returns,
    carrying the overnight variance the intraday measure misses.
    """
    rv, y = np.asarray(rv, dtype=float), np.asarray(y, dtype=float)
    if rv.shape != y.shape:
        raise DomainError("proxy and returns must have the same length")
    total = float(np.sum(rv))
    if not (math.isfinite(total) and total > 0):
        raise DomainError(f"proxy must have a positive finite total, got {total!r}")
    return float(np.sum((y - y.mean()) ** 2)) / total * rv


@dataclass(frozen=True)
class GwResult:
    statistic: float
    dof: int
    p_value: float


def giacomini_white_test(loss_a, loss_b) -> GwResult:
    """
    One-step conditional predictive ability test of equal expected losses,
    with instruments (1, ΔL_(t-1)). A positive mean difference favours b.

    Ω̂ is the uncentered second moment n⁻¹ Σ Z_t Z_t′, not the sample
    covariance; E Z_t = 0 under the null, so both estimate the same matrix.
    """
    loss_a, loss_b = _pair(loss_a, loss_b)
    if loss_a.ndim != 1 or len(loss_a) < MIN_GW_LENGTH:
        raise DomainError(f"need aligned loss series of at least {MIN_GW_LENGTH} days")
    diff = loss_a - loss_b
    if not np.all(np.isfinite(diff)):
        raise DomainError("losses must be finite")
    z = np.column_stack([diff[1:], diff[:-1] * diff[1:]])
    n = len(z)
    z_bar = z.mean(axis=0)
    omega = z.T @ z / n
    if np.linalg.matrix_rank(omega) < GW_DOF:
        return GwResult(0.0, GW_DOF, 1.0)
    statistic = float(n * z_bar @ np.linalg.solve(omega, z_bar))
    return GwResult(statistic, GW_DOF, float(stats.chi2.sf(statistic, GW_DOF)))


def proxies(series: ReturnRangeSeries) -> Dict[str, np.ndarray]:
    """Hansen–Lunde scaled realized variance (if present) and range proxies."""
    found = {}
    if series.rv is not None:
        found["RV"] = hansen_lunde_scale(series.rv, series.y)
    found["RG"] = hansen_lunde_scale(parkinson_estimator(series.r), series.y)
    return found


Key = Tuple[str, str, str]


@dataclass
class LossReport:
    """Per-day losses by (model, proxy, loss), their averages and GW tests."""

    dates: np.ndarray
    losses: Dict[Key, np.ndarray]
    baseline: str
    tests: Dict[Key, Optional[GwResult]] = field(default_factory=dict)

    @property
    def models(self) -> List[str]:
        return list(dict.fromkeys(model for model, _, _ in self.losses))

    @property
    def columns(self) -> List[Tuple[str, str]]:
        return list(dict.fromkeys((proxy, loss) for _, proxy, loss in self.losses))

    def average(self, model: str, proxy: str, loss: str) -> float:
        return float(np.mean(self.losses[model, proxy, loss]))

    def render(self) -> str:
        width = 24
        lines = [
            f"days: {len(self.dates)}  baseline: {self.baseline}",
            "",
            f"{'model':<12}"
            + "".join(f"{proxy + '/' + loss:>{width}}" for proxy, loss in self.columns),
            f"{'':<12}" + f"{'average':>14}{'GW p':>10}" * len(self.columns),
        ]
        for model in self.models:
            row = f"{model:<12}"
            for proxy, loss in self.columns:
                test = self.tests.get((model, proxy, loss))
                p_value = "-" if test is None else f"{test.p_value:.3f}"
                row += f"{self.average(model, proxy, loss):>14.6f}{p_value:>10}"
            lines.append(row)
        return "\n".join(lines) + "\n"


def compare_forecasts(
    forecasts: Mapping[str, Sequence[ForecastRecord]],
    series: ReturnRangeSeries,
    baseline: Optional[str] = None,
) -> LossReport:
    """
    Score every model on the days all of them forecast, for each proxy and
    loss, and test each model against the baseline (the first model unless
    named).
    """
    if len(forecasts) < 2:
        raise DomainError("need forecasts from at least two models")
    baseline = baseline if baseline is not None else next(iter(forecasts))
    if baseline not in forecasts:
        raise DomainError(f"unknown baseline model {baseline!r}")

    days = np.asarray(series.dates, dtype="datetime64[D]")
    means = {model: forecast_means(records) for model, records in forecasts.items()}
    common = days
    for values in means.values():
        common = np.intersect1d(common, values.index.values.astype("datetime64[D]"))
    if not len(common):
        raise DomainError("forecasts and proxies share no dates")
    positions = np.searchsorted(days, common)

    losses: Dict[Key, np.ndarray] = {}
    for proxy, values in proxies(series).items():
        target = values[positions]
        for model, forecast in means.items():
            h = forecast.loc[common.astype("datetime64[ns]")].to_numpy()
            for loss in LOSSES:
                losses[model, proxy, loss] = LOSS_FUNCTIONS[loss](target, h)

    tests: Dict[Key, Optional[GwResult]] = {}
    for model, proxy, loss in losses:
        if model == baseline:
            continue
        try:
            tests[model, proxy, loss] = giacomini_white_test(
                losses[model, proxy, loss], losses[baseline, proxy, loss]
            )
        except DomainError as error:
            logger.warning("no GW test for %s %s/%s: %s", model, proxy, loss, error)
            tests[model, proxy, loss] = None
    return LossReport(common, losses, baseline, tests)
