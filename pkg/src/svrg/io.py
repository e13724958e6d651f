"""
Delimited-text input and output.

Two input layouts are accepted, both comma separated with a header:
``date,open,high,low,close[,rv]`` price files, and ``date,y,r[,rv]`` series
files as written by ``write_series``. All writers format floats with
``%.17g`` so repeated runs produce identical bytes.
"""
import math
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import attr
import numpy as np
import pandas as pd

from .config import DEFAULT_TICK, PERCENT
from .errors import DomainError, ParseError
from .forecast import ForecastRecord
from .models import LatentState, ReturnRangeSeries, nonnegative, positive

logger = getLogger(__package__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"
OHLC_COLUMNS = ("date", "open", "high", "low", "close")
SERIES_COLUMNS = ("date", "y", "r")
FORECAST_COLUMNS = ("date", "model", "mean")
HEADER_LINES = 1


@attr.s(frozen=True)
class OhlcRow:
    """One trading day of prices with an optional realized variance."""

    date: np.datetime64 = attr.ib()
    open: float = attr.ib(converter=float, validator=positive)
    high: float = attr.ib(converter=float, validator=positive)
    low: float = attr.ib(converter=float, validator=positive)
    close: float = attr.ib(converter=float, validator=positive)
    rv: Optional[float] = attr.ib(
        default=None, validator=attr.validators.optional(nonnegative)
    )

    def __attrs_post_init__(self):
        if self.high < max(self.open, self.close):
            raise DomainError(f"high {self.high!r} is below open or close")
        if self.low > min(self.open, self.close):
            raise DomainError(f"low {self.low!r} is above open or close")

    def log_range(self, tick: float = DEFAULT_TICK) -> float:
        """100·log(H/L), with a zero range widened to one price tick."""
        high = self.high if self.high > self.low else self.low + tick
        return PERCENT * math.log(high / self.low)


def _read_frame(path: PathLike) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, comment="#")
    except FileNotFoundError:
        raise ParseError("no such file", str(path)) from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
        raise ParseError(str(error), str(path)) from None
    frame.columns = [str(column).strip().lower() for column in frame.columns]
    return frame


def _line(index: int) -> int:
    return index + HEADER_LINES + 1


def _numbers(frame: pd.DataFrame, columns: Sequence[str], path: PathLike) -> pd.DataFrame:
    values = frame[list(columns)].apply(pd.to_numeric, errors="coerce")
    for index in np.flatnonzero(~np.isfinite(values.to_numpy(dtype=float)).all(axis=1)):
        raise ParseError(
            f"malformed number in columns {', '.join(columns)}", str(path), _line(index)
        )
    return values


def _dates(frame: pd.DataFrame, path: PathLike) -> np.ndarray:
    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    for index in np.flatnonzero(dates.isna().to_numpy()):
        raise ParseError(f"bad date {frame['date'].iloc[index]!r}", str(path), _line(index))
    days = dates.to_numpy().astype("datetime64[D]")
    for index in np.flatnonzero(days[1:] <= days[:-1]):
        raise ParseError("dates must be strictly increasing", str(path), _line(index + 1))
    return days


def _optional_rv(frame: pd.DataFrame, path: PathLike) -> Optional[np.ndarray]:
    if "rv" not in frame.columns:
        return None
    values = _numbers(frame, ("rv",), path)["rv"].to_numpy()
    for index in np.flatnonzero(values < 0):
        raise ParseError("realized variance must be >= 0", str(path), _line(index))
    return values


def read_ohlc(path: PathLike) -> List[OhlcRow]:
    frame = _read_frame(path)
    missing = [column for column in OHLC_COLUMNS if column not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {', '.join(missing)}", str(path), 1)
    dates = _dates(frame, path)
    prices = _numbers(frame, OHLC_COLUMNS[1:], path)
    rv = _optional_rv(frame, path)
    rows = []
    for index, (day, values) in enumerate(zip(dates, prices.itertuples(index=False))):
        try:
            rows.append(
                OhlcRow(day, *values, rv=None if rv is None else float(rv[index]))
            )
        except DomainError as error:
            raise ParseError(str(error), str(path), _line(index)) from None
    return rows


def series_from_ohlc(rows: Sequence[OhlcRow], tick: float = DEFAULT_TICK) -> ReturnRangeSeries:
    """
    Percent log returns and log ranges; the first row only provides the
    previous close.
    """
    if len(rows) < 2:
        raise DomainError(f"need at least 2 rows of prices, got {len(rows)}")
    if not tick > 0:
        raise DomainError(f"tick must be > 0, got {tick!r}")
    closes = np.array([row.close for row in rows])
    floored = sum(1 for row in rows[1:] if row.high == row.low)
    if floored:
        logger.info("%d zero ranges widened to one tick of %g", floored, tick)
    rv = None
    if rows[0].rv is not None:
        rv = [row.rv for row in rows[1:]]
    return ReturnRangeSeries(
        dates=[row.date for row in rows[1:]],
        y=PERCENT * np.diff(np.log(closes)),
        r=[row.log_range(tick) for row in rows[1:]],
        rv=rv,
    )


def read_series(path: PathLike) -> ReturnRangeSeries:
    frame = _read_frame(path)
    missing = [column for column in SERIES_COLUMNS if column not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {', '.join(missing)}", str(path), 1)
    dates = _dates(frame, path)
    values = _numbers(frame, SERIES_COLUMNS[1:], path)
    for index in np.flatnonzero(values["r"].to_numpy() <= 0):
        raise ParseError("ranges must be > 0", str(path), _line(index))
    return ReturnRangeSeries(
        dates, values["y"].to_numpy(), values["r"].to_numpy(), _optional_rv(frame, path)
    )


def ingest(path: PathLike, tick: float = DEFAULT_TICK) -> ReturnRangeSeries:
    """Read a price or series file, telling them apart by their header."""
    frame = _read_frame(path)
    if set(OHLC_COLUMNS) <= set(frame.columns):
        series = series_from_ohlc(read_ohlc(path), tick)
    elif set(SERIES_COLUMNS) <= set(frame.columns):
        series = read_series(path)
    else:
        raise ParseError(
            "header must name date,open,high,low,close or date,y,r", str(path), 1
        )
    if len(series) < 2:
        raise ParseError(f"need at least 2 days, got {len(series)}", str(path))
    logger.info("read %d days from %s", len(series), path)
    return series


def _iso(dates: np.ndarray) -> np.ndarray:
    return np.datetime_as_string(np.asarray(dates, dtype="datetime64[D]"), unit="D")


def _write(frame: pd.DataFrame, path: PathLike):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %d rows to %s", len(frame), path)


def write_series(
    path: PathLike, series: ReturnRangeSeries, state: Optional[LatentState] = None
):
    """Write a series file; a simulated latent path is appended as extra columns."""
    columns: Dict[str, np.ndarray] = {"date": _iso(series.dates), "y": series.y, "r": series.r}
    if series.rv is not None:
        columns["rv"] = series.rv
    if state is not None:
        columns["sigma2"] = state.sigma2
        columns["lambda"] = state.lam
    _write(pd.DataFrame(columns), path)


def write_columns(path: PathLike, columns: Mapping[str, np.ndarray], dates=None):
    """Write named equal-length columns, e.g. posterior draws or latent bands."""
    frame = pd.DataFrame(dict(columns))
    if dates is not None:
        frame.insert(0, "date", _iso(dates))
    _write(frame, path)


def write_forecasts(path: PathLike, records: Sequence[ForecastRecord]):
    _write(
        pd.DataFrame(
            {
                "date": _iso(np.array([record.date for record in records])),
                "model": [record.model for record in records],
                "mean": [record.mean for record in records],
            },
            columns=list(FORECAST_COLUMNS),
        ),
        path,
    )


def read_forecasts(path: PathLike) -> List[ForecastRecord]:
    frame = _read_frame(path)
    missing = [column for column in FORECAST_COLUMNS if column not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {', '.join(missing)}", str(path), 1)
    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    means = _numbers(frame, ("mean",), path)["mean"]
    records = []
    for index, (day, model, mean) in enumerate(zip(dates, frame["model"], means)):
        if pd.isna(day):
            raise ParseError(f"bad date {frame['date'].iloc[index]!r}", str(path), _line(index))
        try:
            records.append(ForecastRecord(day.date(), mean, str(model).strip()))
        except DomainError as error:
            raise ParseError(str(error), str(path), _line(index)) from None
    return records


def write_text(path: PathLike, text: str):
    Path(path).write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)
