import datetime
import os
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd
from stdl.st import ForegroundColor, ansi_ljust, colored

from cascadebess.battery import full_equivalent_cycles
from cascadebess.constants import DT_ID, QUARTERS_PER_HOUR
from cascadebess.data_io import MarketData
from cascadebess.engine import Portfolio
from cascadebess.errors import ValidationError
from cascadebess.timeline import EventKind, MarketSegment

Period = Literal["day", "month", "year"]

SEGMENT_COLUMNS = {
    MarketSegment.DAA: "daa_eur",
    MarketSegment.IDA: "ida_eur",
    MarketSegment.IDC: "idc_eur",
}
PERIODS = ("day", "month", "year")


@dataclass
class TableTheme:
    header: ForegroundColor = "yellow"
    label: ForegroundColor = "light_blue"
    total: ForegroundColor = "green"
    missing: ForegroundColor = "gray"


def _money(value: float) -> float:
    return round(float(value), 2)


def format_table(frame: pd.DataFrame, *, color: bool = True, theme: TableTheme | None = None) -> str:
    """
    Render a frame as an aligned text table. Floats are printed with two decimals and
    missing values as `n/a`.
    """
    theme = theme or TableTheme()

    def cell(value) -> str:
        if value is None or (isinstance(value, (float, np.floating)) and np.isnan(value)):
            return "n/a"
        if isinstance(value, (float, np.floating)):
            return f"{value:.2f}"
        return str(value)

    header = [str(i) for i in frame.columns]
    body = [[cell(v) for v in row] for row in frame.itertuples(index=False)]
    widths = [max([len(h)] + [len(row[j]) for row in body]) for j, h in enumerate(header)]

    def line(values: list[str], first_color: ForegroundColor | None) -> str:
        parts = []
        for j, value in enumerate(values):
            if color and value == "n/a":
                value = colored(value, theme.missing)
            elif color and j == 0 and first_color:
                value = colored(value, first_color)
            parts.append(ansi_ljust(value, widths[j] + 2))
        return "".join(parts).rstrip()

    head = line(header, None)
    lines = [colored(head, theme.header) if color else head]
    for row in body:
        lines.append(line(row, theme.total if row[0] == "total" else theme.label))
    return "\n".join(lines)


@dataclass
class RevenueReport:
    """
    Per-market revenue of a finished backtest.

    Attributes:
        cash (dict[MarketSegment, float]): Net cash per market (EUR).
        total (float): Total revenue (EUR).
        shares (dict[MarketSegment, float] | None): Percentage shares, None when the total is 0.
        cycles (float): Full equivalent cycles charged over the run.
        cycles_per_day (float): Average full equivalent cycles per day.
        breakdown (pd.DataFrame | None): Cash per market and period.
    """

    cash: dict[MarketSegment, float]
    total: float
    shares: dict[MarketSegment, float] | None
    cycles: float
    cycles_per_day: float
    breakdown: pd.DataFrame | None = None

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(total={self.total:.2f}, cycles={self.cycles:.2f})"

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for segment in MarketSegment:
            share = None if self.shares is None else self.shares[segment]
            rows.append({"market": segment.value, "revenue_eur": _money(self.cash[segment]), "share_pct": share})
        rows.append({"market": "total", "revenue_eur": _money(self.total), "share_pct": None if self.shares is None else 100.0})
        frame = pd.DataFrame(rows, columns=["market", "revenue_eur", "share_pct"])
        frame["share_pct"] = frame["share_pct"].astype(float).round(2)
        return frame

    def to_csv(self, path: str | os.PathLike) -> None:
        _write_csv(self.to_frame(), path, na_rep="n/a")

    def breakdown_to_csv(self, path: str | os.PathLike) -> None:
        if self.breakdown is None:
            raise ValidationError("report has no period breakdown")
        _write_csv(self.breakdown, path)

    def as_str(self, *, color: bool = True) -> str:
        text = format_table(self.to_frame(), color=color)
        text += f"\n\ncycles: {self.cycles:.2f} ({self.cycles_per_day:.2f} per day)"
        if self.breakdown is not None:
            text += "\n\n" + format_table(self.breakdown, color=color)
        return text


def trades_frame(portfolio: Portfolio) -> pd.DataFrame:
    """The trade log as a frame with delivery start times, one row per trade."""
    timeline = portfolio.timeline
    stamps = {segment: timeline.timestamps(segment) for segment in MarketSegment}
    rows = [
        {
            "segment": t.segment.value,
            "delivery_index": t.delivery_index,
            "delivery_start": stamps[t.segment][t.delivery_index],
            "side": t.side.value,
            "closing": t.closing,
            "volume_mwh": t.volume,
            "price_eur_mwh": t.price,
            "cash_eur": t.cash,
            "booked_at": t.booked_at,
        }
        for t in portfolio.trades
    ]
    columns = ["segment", "delivery_index", "delivery_start", "side", "closing", "volume_mwh", "price_eur_mwh", "cash_eur", "booked_at"]
    return pd.DataFrame(rows, columns=columns)


def _period_key(stamps: pd.Series, by: Period) -> pd.Series:
    match by:
        case "day":
            return stamps.dt.strftime("%Y-%m-%d")
        case "month":
            return stamps.dt.strftime("%Y-%m")
        case "year":
            return stamps.dt.strftime("%Y")
        case _:
            raise ValidationError(f"unknown period '{by}', expected one of {', '.join(PERIODS)}")


def _breakdown(portfolio: Portfolio, by: Period) -> pd.DataFrame:
    trades = trades_frame(portfolio)
    periods = sorted(set(_period_key(pd.Series(portfolio.timeline.timestamps(MarketSegment.IDC)), by)))
    frame = pd.DataFrame({by: periods})
    if trades.empty:
        for column in SEGMENT_COLUMNS.values():
            frame[column] = 0.0
    else:
        trades[by] = _period_key(trades["delivery_start"], by)
        cash = trades.pivot_table(index=by, columns="segment", values="cash_eur", aggfunc="sum", fill_value=0.0)
        for segment, column in SEGMENT_COLUMNS.items():
            values = cash[segment.value] if segment.value in cash.columns else pd.Series(dtype=float)
            frame[column] = frame[by].map(values).fillna(0.0).astype(float)
    frame["total_eur"] = frame[list(SEGMENT_COLUMNS.values())].sum(axis=1)
    for column in [*SEGMENT_COLUMNS.values(), "total_eur"]:
        frame[column] = frame[column].round(2)
    return frame


def revenue_report(portfolio: Portfolio, by: Period | None = None) -> RevenueReport:
    """
    Break a backtest's revenue down per market.

    Args:
        portfolio (Portfolio): A finished backtest.
        by (str, optional): Add a breakdown per "day", "month" or "year" of delivery.

    Example:
        With cash of 50, 25 and 25 EUR on the DAA, IDA and IDC the shares are 50 %, 25 % and
        25 % of a total of 100 EUR.
    """
    cash = {segment: float(portfolio.cash_by_segment[segment]) for segment in MarketSegment}
    total = float(sum(cash.values()))
    shares = None if total == 0 else {segment: 100.0 * value / total for segment, value in cash.items()}
    stored = 0.0
    if portfolio.position_book is not None:
        stored = float(portfolio.position_book.charge.sum()) * DT_ID * portfolio.battery.eta_ch
    cycles = full_equivalent_cycles(stored, portfolio.battery)
    breakdown = _breakdown(portfolio, by) if by is not None else None
    return RevenueReport(cash, total, shares, cycles, cycles / portfolio.timeline.days, breakdown)


def day_trace(portfolio: Portfolio, data: MarketData, day: datetime.date | str) -> pd.DataFrame:
    """
    Plot-ready quarter-hourly series of one delivery day.

    Columns: prices of the three markets, the final net trades per market (MW, positive =
    bought), the resulting net battery power and the SOC at the start of each quarter.

    Raises:
        ValidationError: If `day` is not inside the backtest window.
    """
    day = pd.Timestamp(day).date()
    timeline = portfolio.timeline
    stamps = timeline.timestamps(MarketSegment.IDC)
    quarters = np.flatnonzero(np.array([t.date() == day for t in stamps]))
    if len(quarters) == 0:
        raise ValidationError(f"day {day} is outside the backtest window {timeline.start.date()}..{(timeline.end - pd.Timedelta(minutes=15)).date()}")
    hours = quarters // QUARTERS_PER_HOUR
    net = {segment: portfolio.net_trades(segment) for segment in MarketSegment}
    book = portfolio.position_book
    soc = portfolio.soc_trajectory
    return pd.DataFrame(
        {
            "timestamp": [t.isoformat() for t in stamps[quarters]],
            "price_daa": data.daa_actual[hours],
            "price_ida": data.ida_actual[quarters],
            "price_id1": data.id1_actual[quarters],
            "net_daa_mw": net[MarketSegment.DAA][quarters],
            "net_ida_mw": net[MarketSegment.IDA][quarters],
            "net_idc_mw": net[MarketSegment.IDC][quarters],
            "net_power_mw": book.net[quarters] if book is not None else 0.0,
            "soc_mwh": soc[quarters] if soc is not None else np.nan,
        }
    )


@dataclass
class SensitivityReport:
    """One row per scenario: median revenues over its runs and forecast errors."""

    frame: pd.DataFrame

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(scenarios={len(self.frame)})"

    def to_csv(self, path: str | os.PathLike) -> None:
        _write_csv(self.frame, path)

    def as_str(self, *, color: bool = True) -> str:
        return format_table(self.frame, color=color)


def _forecast_errors(portfolio: Portfolio) -> dict[str, float]:
    errors = {}
    for kind, name in ((EventKind.DAA_AUCTION, "daa"), (EventKind.IDA_AUCTION, "ida"), (EventKind.IDC_QUARTER, "id1")):
        events = [i for i in portfolio.events if i.kind is kind]
        errors[f"mae_{name}"] = float(np.mean([i.forecast_mae for i in events])) if events else np.nan
        errors[f"rmse_{name}"] = float(np.mean([i.forecast_rmse for i in events])) if events else np.nan
    return errors


def sensitivity_report(results: list[tuple[str, Portfolio]]) -> SensitivityReport:
    """
    Compare backtests of different forecast scenarios.

    Runs sharing a label (e.g. different seeds of one noise level) are reduced to their
    median. Rows keep the order in which labels first appear. ID1 errors are the mean over
    the IDC events of each run.

    Raises:
        ValidationError: If `results` is empty.
    """
    if not results:
        raise ValidationError("sensitivity report needs at least one scenario")
    labels: dict[str, list[Portfolio]] = {}
    for label, portfolio in results:
        labels.setdefault(label, []).append(portfolio)

    rows = []
    for label, portfolios in labels.items():
        runs = []
        for p in portfolios:
            run = {column: p.cash_by_segment[segment] for segment, column in SEGMENT_COLUMNS.items()}
            run["total_eur"] = p.revenue_total
            run.update(_forecast_errors(p))
            runs.append(run)
        medians = pd.DataFrame(runs).median(axis=0, skipna=False)
        row = {"scenario": label, "runs": len(portfolios)}
        row.update({k: round(float(v), 2) for k, v in medians.items()})
        rows.append(row)
    return SensitivityReport(pd.DataFrame(rows))


def _write_csv(frame: pd.DataFrame, path: str | os.PathLike, na_rep: str = "") -> None:
    frame.to_csv(path, index=False, float_format="%.2f", na_rep=na_rep, lineterminator="\n")


def write_trades_csv(portfolio: Portfolio, path: str | os.PathLike) -> None:
    frame = trades_frame(portfolio)
    frame["delivery_start"] = [t.isoformat() for t in frame["delivery_start"]]
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")


def write_soc_csv(portfolio: Portfolio, path: str | os.PathLike) -> None:
    """SOC at every quarter boundary together with the final net position."""
    timeline = portfolio.timeline
    boundaries = pd.date_range(timeline.start, periods=timeline.Q + 1, freq=MarketSegment.IDC.freq)
    book = portfolio.position_book
    net = np.append(book.net, np.nan) if book is not None else np.full(timeline.Q + 1, np.nan)
    frame = pd.DataFrame(
        {
            "timestamp": [t.isoformat() for t in boundaries],
            "soc_mwh": portfolio.soc_trajectory.values,
            "net_power_mw": net,
        }
    )
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")


def write_events_csv(portfolio: Portfolio, path: str | os.PathLike) -> None:
    frame = pd.DataFrame(
        [
            {
                "event": e.label,
                "fire_index": e.fire_index,
                "forecast_revenue_eur": e.forecast_revenue,
                "cash_eur": e.cash,
                "trades": e.n_trades,
                "forecast_mae": e.forecast_mae,
                "forecast_rmse": e.forecast_rmse,
            }
            for e in portfolio.events
        ],
        columns=["event", "fire_index", "forecast_revenue_eur", "cash_eur", "trades", "forecast_mae", "forecast_rmse"],
    )
    _write_csv(frame, path)


def write_day_traces(portfolio: Portfolio, data: MarketData, directory: str | os.PathLike) -> list[str]:
    """Write one `trace_<date>.csv` per delivery day and return the paths."""
    paths = []
    days = sorted({t.date() for t in portfolio.timeline.timestamps(MarketSegment.IDC)})
    for day in days:
        path = os.path.join(directory, f"trace_{day.isoformat()}.csv")
        day_trace(portfolio, data, day).to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
        paths.append(path)
    return paths


__all__ = [
    "TableTheme",
    "RevenueReport",
    "SensitivityReport",
    "format_table",
    "trades_frame",
    "revenue_report",
    "day_trace",
    "sensitivity_report",
    "write_trades_csv",
    "write_soc_csv",
    "write_events_csv",
    "write_day_traces",
]
