from __future__ import annotations

import abc
import asyncio
import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import Dict, List, Optional, Sequence

import attr
import numpy as np
import pandas as pd

from .config import EWMA_DECAY, ROLLING_BURNIN, ROLLING_DRAWS
from .errors import DomainError
from .mcmc import chain_rng, run_mcmc
from .models import McmcConfig, Priors, ReturnRangeSeries, positive
from .pool import WorkerPool
from .rangedist import parkinson_estimator

logger = getLogger(__package__)

ROLLING_CONFIG = McmcConfig(n_burnin=ROLLING_BURNIN, n_draws=ROLLING_DRAWS, log_every=0)


def _optional_draws(value) -> Optional[np.ndarray]:
    return None if value is None else np.asarray(value, dtype=float)


@attr.s(frozen=True)
class ForecastRecord:
    """One-day-ahead forecast of the variance on ``date``."""

    date: np.datetime64 = attr.ib(converter=lambda value: np.datetime64(value, "D"))
    mean: float = attr.ib(converter=float, validator=positive)
    model: str = attr.ib()
    draws: Optional[np.ndarray] = attr.ib(
        default=None, converter=_optional_draws, eq=False, repr=False
    )


class Forecaster(metaclass=abc.ABCMeta):
    """
    Abstract base class defining the API a forecasting model must implement.
    Implementations must be picklable so windows can run in worker processes.
    """

    tag: str

    @abc.abstractmethod
    def forecast(
        self, window: ReturnRangeSeries, target: np.datetime64, rng: np.random.Generator
    ) -> ForecastRecord:
        """Forecast the variance of the day after ``window``, dated ``target``."""


@dataclass(frozen=True)
class SvrgForecaster(Forecaster):
    """
    Refit the range-corrected SV model on every window and forecast with the
    posterior predictive mean of the next variance.
    """

    priors: Priors = Priors()
    config: McmcConfig = ROLLING_CONFIG
    keep_draws: bool = False
    tag: str = "SVRG"

    def forecast(
        self, window: ReturnRangeSeries, target: np.datetime64, rng: np.random.Generator
    ) -> ForecastRecord:
        draws = run_mcmc(window, self.priors, self.config, rng)
        return ForecastRecord(
            target,
            draws.predictive_mean,
            self.tag,
            draws.sigma2_next if self.keep_draws else None,
        )


@dataclass(frozen=True)
class ParkinsonEwmaForecaster(Forecaster):
    """
    Naive benchmark: exponentially weighted average of the Parkinson
    estimates, rescaled so their window mean equals the return variance.
    """

    decay: float = EWMA_DECAY
    tag: str = "EWMA"

    def __post_init__(self):
        if not 0 < self.decay < 1:
            raise DomainError(f"decay must lie in (0, 1), got {self.decay!r}")

    def forecast(
        self, window: ReturnRangeSeries, target: np.datetime64, rng: np.random.Generator
    ) -> ForecastRecord:
        estimates = parkinson_estimator(window.r)
        scale = float(np.sum((window.y - window.y.mean()) ** 2) / np.sum(estimates))
        smoothed = pd.Series(estimates).ewm(alpha=1.0 - self.decay, adjust=False).mean()
        return ForecastRecord(target, scale * float(smoothed.iloc[-1]), self.tag)


@dataclass(frozen=True)
class FileForecaster(Forecaster):
    """Replay forecasts produced elsewhere, e.g. by the realized SV benchmark."""

    records: Dict[np.datetime64, float] = field(default_factory=dict)
    tag: str = "FILE"

    @classmethod
    def from_records(cls, records: Sequence[ForecastRecord]) -> FileForecaster:
        tags = {record.model for record in records}
        if len(tags) > 1:
            raise DomainError(f"forecast records mix models {sorted(tags)!r}")
        return cls(
            {record.date: record.mean for record in records},
            tags.pop() if tags else "FILE",
        )

    def forecast(
        self, window: ReturnRangeSeries, target: np.datetime64, rng: np.random.Generator
    ) -> ForecastRecord:
        try:
            return ForecastRecord(target, self.records[np.datetime64(target, "D")], self.tag)
        except KeyError:
            raise DomainError(f"no {self.tag} forecast for {target}") from None


def _forecast_window(
    forecaster: Forecaster,
    series: ReturnRangeSeries,
    start: int,
    length: int,
    seed: int,
) -> ForecastRecord:
    window = series.window(start, start + length)
    target = series.dates[start + length]
    return forecaster.forecast(window, target, chain_rng(seed, start))


async def _rolling(
    series: ReturnRangeSeries,
    length: int,
    forecaster: Forecaster,
    seed: int,
    workers: int,
    processes: bool,
) -> List[ForecastRecord]:
    starts = range(len(series) - length)
    pool = await WorkerPool.create(workers, processes=processes)
    try:
        results = await pool.map(
            _forecast_window,
            ((forecaster, series, start, length, seed) for start in starts),
        )
    finally:
        await pool.close()
    logger.debug("rolling forecast finished: %r", pool)

    records = []
    for start, result in zip(starts, results):
        if isinstance(result, ForecastRecord):
            records.append(result)
        else:
            logger.error(
                "no %s forecast for %s: %s",
                forecaster.tag,
                series.dates[start + length],
                result,
                exc_info=result,
            )
    return sorted(records, key=lambda record: record.date)


def rolling_forecast(
    series: ReturnRangeSeries,
    window: int,
    forecaster: Forecaster,
    seed: int = 0,
    workers: int = 1,
    processes: bool = False,
) -> List[ForecastRecord]:
    """
    Fit on days [i, i + window), forecast day i + window, and slide by one
    day until the series is exhausted. A window whose fit fails leaves a gap.
    Window i draws from SeedSequence([seed, i]), so the output does not
    depend on the number of workers.
    """
    if window < 2:
        raise DomainError(f"window must be at least 2 days, got {window!r}")
    if window >= len(series):
        raise DomainError(
            f"window of {window} days leaves nothing to forecast in {len(series)} days"
        )
    dates = series.dates
    if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
        raise DomainError("series dates must be strictly increasing")
    records = asyncio.run(_rolling(series, window, forecaster, seed, workers, processes))
    missing = len(series) - window - len(records)
    if missing:
        logger.error("%d of %d windows produced no forecast", missing, len(series) - window)
    return records


def forecast_means(records: Sequence[ForecastRecord]) -> pd.Series:
    """Forecasts as a date-indexed series; duplicated dates are rejected."""
    index = pd.DatetimeIndex([record.date for record in records])
    if index.has_duplicates:
        raise DomainError("forecast records repeat a date")
    values = [record.mean for record in records]
    if any(not math.isfinite(value) for value in values):
        raise DomainError("forecasts must be finite")
    return pd.Series(values, index=index).sort_index()
