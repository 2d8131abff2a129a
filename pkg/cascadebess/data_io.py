import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pandas.api.types import is_datetime64_any_dtype
from loguru import logger

from cascadebess.constants import PRICE_LIMIT, QUARTERS_PER_HOUR
from cascadebess.errors import ConfigurationError, DataError, ValidationError
from cascadebess.strategies import Forecast
from cascadebess.timeline import MarketSegment, Timeline

COLUMNS = ["timestamp", "segment", "price_eur_mwh"]
KINDS = ("actual", "forecast")
SEGMENT_ALIASES = {"DAA": MarketSegment.DAA, "IDA": MarketSegment.IDA, "IDC": MarketSegment.IDC, "ID1": MarketSegment.IDC}


@dataclass
class MarketData:
    """
    Actual prices of the three segments over a timeline, plus optional forecasts.

    Attributes:
        timeline (Timeline): The window the series cover.
        daa_actual (np.ndarray): DAA clearing prices, one per hour.
        ida_actual (np.ndarray): IDA clearing prices, one per quarter.
        id1_actual (np.ndarray): ID1 index, one per quarter.
        forecasts (dict[MarketSegment, np.ndarray]): Forecast series read from file.
    """

    timeline: Timeline
    daa_actual: np.ndarray
    ida_actual: np.ndarray
    id1_actual: np.ndarray
    forecasts: dict[MarketSegment, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.daa_actual = np.asarray(self.daa_actual, dtype=float)
        self.ida_actual = np.asarray(self.ida_actual, dtype=float)
        self.id1_actual = np.asarray(self.id1_actual, dtype=float)
        self.forecasts = {k: np.asarray(v, dtype=float) for k, v in self.forecasts.items()}
        for segment in MarketSegment:
            expected = self.timeline.periods(segment)
            if len(self.actual(segment)) != expected:
                raise DataError(f"{segment.value} series has {len(self.actual(segment))} values, timeline needs {expected}")
            if segment in self.forecasts and len(self.forecasts[segment]) != expected:
                raise DataError(f"{segment.value} forecast has {len(self.forecasts[segment])} values, timeline needs {expected}")

    def __repr__(self) -> str:
        forecasts = ",".join(i.value for i in self.forecasts) or "none"
        return f"{self.__class__.__name__}(start='{self.timeline.start.isoformat()}', H={self.timeline.H}, forecasts={forecasts})"

    def actual(self, segment: MarketSegment) -> np.ndarray:
        return {
            MarketSegment.DAA: self.daa_actual,
            MarketSegment.IDA: self.ida_actual,
            MarketSegment.IDC: self.id1_actual,
        }[segment]

    def has_forecast(self, segment: MarketSegment) -> bool:
        return segment in self.forecasts

    def forecast(self, segment: MarketSegment) -> np.ndarray:
        """
        Raises:
            DataError: If the data carries no forecast for `segment`.
        """
        if segment not in self.forecasts:
            raise DataError(f"no {segment.value} forecast in the market data")
        return self.forecasts[segment]

    def check_covers(self, timeline: Timeline) -> None:
        if self.timeline.start != timeline.start or self.timeline.H != timeline.H:
            raise DataError(f"market data covers {self.timeline}, backtest needs {timeline}")


def _line(index) -> int:
    # header is line 1
    return int(index) + 2


def _to_datetime(values: pd.Series) -> pd.Series:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FutureWarning)
        try:
            stamps = pd.to_datetime(values, format="ISO8601")
        except ValueError:
            stamps = None
    if stamps is None or not is_datetime64_any_dtype(stamps):
        # mixed UTC offsets
        stamps = pd.to_datetime(values, format="ISO8601", utc=True)
    return stamps


def _parse_timestamps(values: pd.Series, timezone: str | None) -> pd.Series:
    try:
        stamps = _to_datetime(values)
    except (ValueError, TypeError) as e:
        raise DataError(f"unparseable timestamps: {e}") from e
    if stamps.dt.tz is not None:
        return stamps.dt.tz_convert(timezone) if timezone else stamps
    if timezone:
        try:
            return stamps.dt.tz_localize(timezone, ambiguous="raise", nonexistent="raise")
        except Exception as e:
            raise DataError(f"cannot localize timestamps to {timezone}: {e}") from e
    return stamps


def _reject_dst(timeline: Timeline) -> None:
    if timeline.start.tzinfo is None:
        return
    stamps = timeline.timestamps(MarketSegment.IDC)
    offsets = {t.utcoffset() for t in stamps}
    if len(offsets) > 1:
        raise DataError(f"daylight saving transition inside the test window starting {timeline.start}")


def _read_frame(
    path: str | os.PathLike, timezone: str | None, default_kind: str = "actual"
) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise DataError(f"market data file not found: {path}")
    try:
        df = pd.read_csv(
            path,
            dtype={"timestamp": str, "segment": str, "kind": str},
            float_precision="round_trip",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"{path}: {e}") from e
    missing = [i for i in COLUMNS if i not in df.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {', '.join(missing)}")

    segments = df["segment"].str.strip().str.upper().map(SEGMENT_ALIASES)
    for index in df.index[segments.isna().to_numpy()]:
        raise DataError(f"line {_line(index)}: unknown segment '{df.at[index, 'segment']}'")
    df["segment"] = segments

    if "kind" in df.columns:
        df["kind"] = df["kind"].fillna(default_kind).str.strip().str.lower()
        for index in df.index[(~df["kind"].isin(KINDS)).to_numpy()]:
            raise DataError(f"line {_line(index)}: kind must be 'actual' or 'forecast', got '{df.at[index, 'kind']}'")
    else:
        df["kind"] = default_kind

    prices = pd.to_numeric(df["price_eur_mwh"], errors="coerce")
    for index in df.index[prices.isna().to_numpy()]:
        raise DataError(f"line {_line(index)}: missing or non-numeric price '{df.at[index, 'price_eur_mwh']}'")
    for index in df.index[(prices.abs() > PRICE_LIMIT).to_numpy()]:
        raise DataError(f"line {_line(index)}: price {prices[index]} outside +/-{PRICE_LIMIT:g} EUR/MWh")
    df["price_eur_mwh"] = prices.astype(float)

    for index in df.index[df["timestamp"].isna().to_numpy()]:
        raise DataError(f"line {_line(index)}: missing timestamp")
    df["timestamp"] = _parse_timestamps(df["timestamp"], timezone)
    return df


def _series(df: pd.DataFrame, segment: MarketSegment, kind: str, timeline: Timeline) -> np.ndarray | None:
    rows = df[(df["segment"] == segment) & (df["kind"] == kind)]
    if rows.empty:
        return None
    unit = "hour" if segment is MarketSegment.DAA else "quarter"
    try:
        offset = (rows["timestamp"] - timeline.start) / segment.freq
    except TypeError as e:
        raise DataError(f"timestamps and test window disagree on timezone awareness: {e}") from e
    misaligned = offset != np.floor(offset)
    for index in rows.index[misaligned.to_numpy()]:
        raise DataError(f"line {_line(index)}: {segment.value} timestamp {rows.at[index, 'timestamp']} is not on the {unit} grid")
    n = timeline.periods(segment)
    inside = (offset >= 0) & (offset < n)
    if not inside.all():
        logger.warning("ignoring {} {} {} row(s) outside the test window", int((~inside).sum()), segment.value, kind)
    rows, offset = rows[inside], offset[inside].astype(int)

    duplicated = offset.duplicated(keep="first")
    for index in rows.index[duplicated.to_numpy()]:
        first = rows.index[((offset == offset[index]) & ~duplicated).to_numpy()][0]
        raise DataError(f"line {_line(index)}: duplicate {segment.value} {kind} timestamp {rows.at[index, 'timestamp']} (first on line {_line(first)})")

    values = np.full(n, np.nan)
    values[offset.to_numpy()] = rows["price_eur_mwh"].to_numpy()
    gaps = np.flatnonzero(np.isnan(values))
    if len(gaps):
        stamp = timeline.start + gaps[0] * segment.freq
        raise DataError(f"missing {segment.value} {kind} {unit} {gaps[0]} ({stamp.isoformat()}), {len(gaps)} missing in total")
    return values


def infer_timeline(path: str | os.PathLike, timezone: str | None = None) -> Timeline:
    """
    Derive the test window from the actual DAA rows of a market file.

    Raises:
        DataError: If the file has no actual DAA rows.
    """
    df = _read_frame(path, timezone)
    return _infer_timeline(df)


def _infer_timeline(df: pd.DataFrame) -> Timeline:
    rows = df[(df["segment"] == MarketSegment.DAA) & (df["kind"] == "actual")]
    if rows.empty:
        raise DataError("market data has no actual DAA rows")
    start, stop = rows["timestamp"].min(), rows["timestamp"].max()
    hours = int((stop - start) / pd.Timedelta(hours=1)) + 1
    return Timeline(start, hours)


def load_market_csv(
    path: str | os.PathLike, timeline: Timeline | None = None, timezone: str | None = None
) -> MarketData:
    """
    Read and validate a market data CSV.

    The file has the columns `timestamp, segment, price_eur_mwh` and optionally `kind`
    (`actual` or `forecast`, default `actual`). Rows outside the timeline are ignored.

    Args:
        path (str | os.PathLike): CSV file.
        timeline (Timeline, optional): Window to load. Inferred from the DAA rows if omitted.
        timezone (str, optional): Zone for naive timestamps and for the test window.

    Raises:
        DataError: On a missing file, unparseable rows, gaps, duplicates, misaligned
            timestamps, prices beyond +/-9999 EUR/MWh or a DST transition in the window.
    """
    df = _read_frame(path, timezone)
    if timeline is None:
        timeline = _infer_timeline(df)
    elif timezone and timeline.start.tzinfo is None:
        timeline = Timeline(timeline.start.tz_localize(timezone), timeline.H)
    _reject_dst(timeline)
    tz_data, tz_window = df["timestamp"].dt.tz, timeline.start.tzinfo
    if (tz_data is None) != (tz_window is None):
        raise DataError(f"{path}: timestamps and test window disagree on timezone awareness")

    actual = {}
    forecasts = {}
    for segment in MarketSegment:
        values = _series(df, segment, "actual", timeline)
        if values is None:
            raise DataError(f"{path}: no actual {segment.value} prices")
        actual[segment] = values
        forecast = _series(df, segment, "forecast", timeline)
        if forecast is not None:
            forecasts[segment] = forecast
    data = MarketData(
        timeline, actual[MarketSegment.DAA], actual[MarketSegment.IDA], actual[MarketSegment.IDC], forecasts
    )
    logger.debug("loaded {} from {}", data, path)
    return data


def load_forecasts(
    path: str | os.PathLike, timeline: Timeline, timezone: str | None = None
) -> dict[MarketSegment, np.ndarray]:
    """
    Read the forecast series of a separate forecast file.

    Rows without a `kind` column count as forecasts. Segments missing from the file are
    absent from the result.

    Raises:
        DataError: On the same problems `load_market_csv` reports.
    """
    df = _read_frame(path, timezone, default_kind="forecast")
    if timezone and timeline.start.tzinfo is None:
        timeline = Timeline(timeline.start.tz_localize(timezone), timeline.H)
    forecasts = {}
    for segment in MarketSegment:
        values = _series(df, segment, "forecast", timeline)
        if values is not None:
            forecasts[segment] = values
    if not forecasts:
        raise DataError(f"{path}: no forecast rows")
    return forecasts


def write_market_csv(data: MarketData, path: str | os.PathLike) -> None:
    """Write market data in the format `load_market_csv` reads."""
    frames = []
    series = [(segment, "actual", data.actual(segment)) for segment in MarketSegment]
    series += [(segment, "forecast", values) for segment, values in data.forecasts.items()]
    for segment, kind, values in series:
        stamps = data.timeline.timestamps(segment)
        frames.append(
            pd.DataFrame(
                {
                    "timestamp": [t.isoformat() for t in stamps],
                    "segment": segment.value,
                    "price_eur_mwh": values,
                    "kind": kind,
                }
            )
        )
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, lineterminator="\n")


def perfect_forecast(actual, segment: MarketSegment = MarketSegment.IDC) -> Forecast:
    """
    A forecast equal to the actual prices.

    Example:
        ```python
        >>> perfect_forecast([1.0, -2.0, 3.0]).values
        array([ 1., -2.,  3.])
        ```
    """
    return Forecast(segment, np.array(actual, dtype=float, copy=True))


def noisy_id1_forecast(actual, sigma: float, seed: int, event: int = 0) -> Forecast:
    """
    ID1 forecast with multiplicative Gaussian error: actual * (1 + sigma * eps).

    The error draws depend only on (`seed`, `event`, position), so every IDC event sees
    fresh errors and the same inputs always give the same forecast.

    Args:
        actual (array-like): Actual ID1 prices of the event window.
        sigma (float): Relative volatility (0.1 for 10 %).
        seed (int): Non-negative seed.
        event (int, optional): Index of the trading event.

    Raises:
        ConfigurationError: If `sigma` or `seed` is negative.
    """
    if sigma < 0:
        raise ConfigurationError(f"sigma must be non-negative, got {sigma}")
    if seed < 0 or event < 0:
        raise ConfigurationError(f"seed and event must be non-negative, got {seed}, {event}")
    actual = np.asarray(actual, dtype=float)
    if sigma == 0:
        return perfect_forecast(actual, MarketSegment.IDC)
    rng = np.random.default_rng([seed, event])
    eps = rng.standard_normal(len(actual))
    return Forecast(MarketSegment.IDC, actual * (1.0 + sigma * eps))


def _errors(forecast, actual) -> np.ndarray:
    forecast = np.asarray(forecast, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if forecast.shape != actual.shape:
        raise ValidationError(f"forecast has {forecast.size} values, actual {actual.size}")
    if forecast.size == 0:
        raise ValidationError("cannot compute forecast errors of an empty series")
    return forecast - actual


def mae(forecast, actual) -> float:
    """
    Mean absolute error.

    Example:
        ```python
        >>> mae([3.0, -4.0], [0.0, 0.0])
        3.5
        ```
    """
    return float(np.mean(np.abs(_errors(forecast, actual))))


def rmse(forecast, actual) -> float:
    """Root mean square error."""
    return float(np.sqrt(np.mean(np.square(_errors(forecast, actual)))))


def _bump(hours: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((hours - center) / width) ** 2)


def synthetic_market_data(
    start: str | pd.Timestamp = "2023-01-02",
    days: int = 1,
    seed: int = 0,
    base: float = 90.0,
    day_sigma: float = 12.0,
    hour_sigma: float = 6.0,
    ida_sigma: float = 10.0,
    id1_sigma: float = 15.0,
    forecast_sigma: float | None = 12.0,
) -> MarketData:
    """
    Generate a realistic-looking price set with a night trough, morning and evening peaks and a
    midday solar dip.

    IDA prices follow the DAA with a quarter-hour ramp inside each hour and extra noise. ID1
    follows the IDA with more noise. All prices are rounded to cents.

    Args:
        start (str | pd.Timestamp, optional): First delivery hour.
        days (int, optional): Number of days.
        seed (int, optional): Generator seed.
        base (float, optional): Mean price level (EUR/MWh).
        day_sigma (float, optional): Day-to-day level noise.
        hour_sigma (float, optional): Hourly noise on the DAA.
        ida_sigma (float, optional): Quarter-hourly noise of the IDA around the DAA.
        id1_sigma (float, optional): Quarter-hourly noise of ID1 around the IDA.
        forecast_sigma (float, optional): Additive error of the generated DAA and IDA
            forecasts. `None` generates no forecasts.
    """
    if days < 1:
        raise ConfigurationError(f"days must be at least 1, got {days}")
    timeline = Timeline.from_days(start, days)
    rng = np.random.default_rng(seed)
    hours = np.arange(timeline.H) % 24
    shape = (
        -30.0 * _bump(hours, 3.5, 2.5)
        + 35.0 * _bump(hours, 8.0, 1.5)
        - 40.0 * _bump(hours, 13.0, 2.5)
        + 55.0 * _bump(hours, 19.0, 1.8)
    )
    level = np.repeat(rng.normal(0.0, day_sigma, days), 24)
    daa = base + level + shape + rng.normal(0.0, hour_sigma, timeline.H)

    slope = np.gradient(np.concatenate([daa, daa[-1:]]))[:-1]
    ramp = np.tile((np.arange(QUARTERS_PER_HOUR) - 1.5) / QUARTERS_PER_HOUR, timeline.H)
    ida = np.repeat(daa, QUARTERS_PER_HOUR) + np.repeat(slope, QUARTERS_PER_HOUR) * ramp
    ida = ida + rng.normal(0.0, ida_sigma, timeline.Q)
    id1 = ida + rng.normal(0.0, id1_sigma, timeline.Q)

    def clean(values: np.ndarray) -> np.ndarray:
        return np.round(np.clip(values, -PRICE_LIMIT, PRICE_LIMIT), 2)

    forecasts = {}
    if forecast_sigma is not None:
        forecasts[MarketSegment.DAA] = clean(daa + rng.normal(0.0, forecast_sigma, timeline.H))
        forecasts[MarketSegment.IDA] = clean(ida + rng.normal(0.0, forecast_sigma, timeline.Q))
    return MarketData(timeline, clean(daa), clean(ida), clean(id1), forecasts)


__all__ = [
    "MarketData",
    "load_market_csv",
    "load_forecasts",
    "infer_timeline",
    "write_market_csv",
    "perfect_forecast",
    "noisy_id1_forecast",
    "mae",
    "rmse",
    "synthetic_market_data",
]
