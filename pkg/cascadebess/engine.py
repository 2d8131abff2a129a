from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from loguru import logger

from cascadebess.battery import BatteryParams, SocTrajectory, step_soc
from cascadebess.constants import DT_ID, FEASIBILITY_TOL, QUARTERS_PER_HOUR, ZERO_TOL
from cascadebess.data_io import MarketData, mae, noisy_id1_forecast, perfect_forecast, rmse
from cascadebess.errors import (
    BookkeepingError,
    ConfigurationError,
    InfeasibleEventError,
    SolverError,
)
from cascadebess.milp import MilpProblem, SolveStatus, check_solution, solve
from cascadebess.strategies import (
    Forecast,
    PositionBook,
    Signals,
    build_daa,
    build_ida,
    build_idc,
    extract_signals,
    hourly_to_quarters,
)
from cascadebess.timeline import (
    EventKind,
    MarketSegment,
    Timeline,
    TradingEvent,
    build_event_calendar,
)


class Side(str, Enum):
    BUY = "buy"
    SELL = "sell"


class ForecastMode(str, Enum):
    """Where a segment's price forecast comes from."""

    PERFECT = "perfect"
    FROM_FILE = "file"
    NOISY_ID1 = "noisy"


@dataclass(frozen=True)
class Trade:
    """
    A single simulated exchange trade.

    Attributes:
        segment (MarketSegment): Market the trade was placed on.
        delivery_index (int): Delivery period (hour for the DAA, quarter otherwise).
        side (Side): Buy or sell.
        volume (float): Energy in MWh.
        price (float): Actual market price the trade settled at (EUR/MWh).
        booked_at (int): Quarter index of the trading event that placed it.
        closing (bool): Whether the trade unwinds an earlier opposite position.
    """

    segment: MarketSegment
    delivery_index: int
    side: Side
    volume: float
    price: float
    booked_at: int = 0
    closing: bool = False

    @property
    def cash(self) -> float:
        """Signed cash flow: sells earn, buys pay."""
        amount = self.volume * self.price
        return amount if self.side is Side.SELL else -amount


@dataclass
class EventRecord:
    """Ledger entry of one executed trading event."""

    label: str
    kind: EventKind
    fire_index: int
    forecast_revenue: float
    cash: float
    n_trades: int
    forecast_mae: float = 0.0
    forecast_rmse: float = 0.0


@dataclass
class BacktestConfig:
    """
    Everything a backtest needs besides the market data.

    Args:
        battery (BatteryParams): Battery parameters.
        timeline (Timeline): The test window.
        n_p (int): IDC prediction horizon in quarters.
        forecast_daa (ForecastMode): Source of the DAA forecast.
        forecast_ida (ForecastMode): Source of the IDA forecast.
        forecast_idc (ForecastMode): Source of the ID1 forecast of every IDC event.
        sigma (float): Relative volatility of the noisy ID1 forecast.
        seed (int): Seed of the noisy ID1 forecast.
        backend (str): Solver backend, "highs" or "bnb".
        check_solutions (bool): Audit every solution against its problem and fail on violations.
    """

    battery: BatteryParams
    timeline: Timeline
    n_p: int = 96
    forecast_daa: ForecastMode = ForecastMode.PERFECT
    forecast_ida: ForecastMode = ForecastMode.PERFECT
    forecast_idc: ForecastMode = ForecastMode.PERFECT
    sigma: float = 0.0
    seed: int = 0
    backend: str = "highs"
    check_solutions: bool = False

    def __post_init__(self) -> None:
        if self.n_p < 1:
            raise ConfigurationError(f"n_p must be at least 1, got {self.n_p}")
        if self.sigma < 0:
            raise ConfigurationError(f"sigma must be non-negative, got {self.sigma}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        for name in ("forecast_daa", "forecast_ida"):
            if getattr(self, name) is ForecastMode.NOISY_ID1:
                raise ConfigurationError(f"{name} cannot be '{ForecastMode.NOISY_ID1.value}'")


@dataclass
class Portfolio:
    """
    Positions, trades and cash flows of a backtest.

    Attributes:
        trades (list[Trade]): Every trade in booking order.
        cash_by_segment (dict[MarketSegment, float]): Net cash per market.
        position_book (PositionBook): Final gross positions per quarter.
        soc_trajectory (SocTrajectory): Physical SOC over all quarters.
        events (list[EventRecord]): Per-event ledger.
    """

    battery: BatteryParams
    timeline: Timeline
    trades: list[Trade] = field(default_factory=list)
    cash_by_segment: dict[MarketSegment, float] = field(
        default_factory=lambda: {segment: 0.0 for segment in MarketSegment}
    )
    position_book: PositionBook | None = None
    soc_trajectory: SocTrajectory | None = None
    events: list[EventRecord] = field(default_factory=list)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(trades={len(self.trades)}, revenue_total={self.revenue_total:.2f})"

    @property
    def revenue_total(self) -> float:
        return float(sum(self.cash_by_segment.values()))

    def trades_of(self, segment: MarketSegment) -> list[Trade]:
        return [i for i in self.trades if i.segment is segment]

    def net_trades(self, segment: MarketSegment) -> np.ndarray:
        """
        Net traded power of a segment per quarter in MW (positive = bought).

        DAA trades are hourly and spread onto their four quarters.
        """
        net = np.zeros(self.timeline.Q)
        for trade in self.trades_of(segment):
            power = trade.volume / trade.segment.dt
            if trade.side is Side.SELL:
                power = -power
            if segment is MarketSegment.DAA:
                q = trade.delivery_index * QUARTERS_PER_HOUR
                net[q : q + QUARTERS_PER_HOUR] += power
            else:
                net[trade.delivery_index] += power
        return net

    def record(self, trades: list[Trade], segment: MarketSegment) -> float:
        cash = float(sum(i.cash for i in trades))
        self.trades.extend(trades)
        self.cash_by_segment[segment] += cash
        return cash


def settle(
    signals: Signals, actual_prices, dt: float | None = None, booked_at: int = 0
) -> tuple[list[Trade], float]:
    """
    Turn signals into trades at actual market prices.

    `actual_prices` is the full price series of the segment, indexed by delivery period.
    Volume is power times `dt`. Zero volumes produce no trade.

    Returns:
        The trades and the cash delta (sells minus buys).

    Example:
        ```python
        >>> signals = Signals(MarketSegment.IDC, 0, np.array([0.0]), np.array([1.0]))
        >>> trades, cash = settle(signals, [200.0])
        >>> cash
        50.0
        ```
    """
    dt = signals.dt if dt is None else dt
    prices = np.asarray(actual_prices, dtype=float)
    n = signals.periods
    closes = (
        signals.close_charge if len(signals.close_charge) else np.zeros(n),
        signals.close_dis if len(signals.close_dis) else np.zeros(n),
    )
    trades = []
    for i in range(n):
        d = signals.start + i
        legs = (
            (signals.new_charge[i], Side.BUY, False),
            (closes[0][i], Side.BUY, True),
            (signals.new_dis[i], Side.SELL, False),
            (closes[1][i], Side.SELL, True),
        )
        for power, side, closing in legs:
            if power > 0:
                trades.append(
                    Trade(signals.segment, d, side, float(power) * dt, float(prices[d]), booked_at, closing)
                )
    return trades, float(sum(i.cash for i in trades))


def apply_trades_to_book(book: PositionBook, signals: Signals) -> PositionBook:
    """
    Return a new book with the signals applied.

    New trades add to their own side. A closing buy reduces the sell position and a closing
    sell reduces the buy position. Hourly DAA signals are spread onto quarters.

    Raises:
        BookkeepingError: If a closing trade exceeds the position it closes.
    """
    result = book.copy()
    if signals.segment is MarketSegment.DAA:
        start = signals.start * QUARTERS_PER_HOUR
        new_charge = hourly_to_quarters(signals.new_charge)
        new_dis = hourly_to_quarters(signals.new_dis)
        close_charge = close_dis = np.zeros(len(new_charge))
    else:
        start = signals.start
        new_charge, new_dis = signals.new_charge, signals.new_dis
        n = len(new_charge)
        close_charge = signals.close_charge if len(signals.close_charge) else np.zeros(n)
        close_dis = signals.close_dis if len(signals.close_dis) else np.zeros(n)

    stop = start + len(new_charge)
    if start < 0 or stop > len(book):
        raise BookkeepingError(f"signals cover quarters {start}..{stop - 1}, book has {len(book)}")
    charge = result.charge[start:stop] + new_charge - close_dis
    discharge = result.discharge[start:stop] + new_dis - close_charge
    for name, values in (("charge", charge), ("discharge", discharge)):
        bad = np.flatnonzero(values < -FEASIBILITY_TOL)
        if len(bad):
            q = start + int(bad[0])
            raise BookkeepingError(f"closing exceeds the existing {name} position at quarter {q}")
    result.charge[start:stop] = np.where(charge < ZERO_TOL, 0.0, charge)
    result.discharge[start:stop] = np.where(discharge < ZERO_TOL, 0.0, discharge)
    return result


def physical_soc_at(book: PositionBook, params: BatteryParams, upto_q: int) -> float:
    """
    SOC at the start of quarter `upto_q`, folding the SOC step over the booked positions.

    Example:
        ```python
        >>> params = BatteryParams(eta_ch=1.0, gamma_month=0.0)
        >>> book = PositionBook(np.ones(4), np.zeros(4))
        >>> physical_soc_at(book, params, 4)
        1.0
        ```
    """
    e = params.e_init
    for q in range(upto_q):
        e = step_soc(e, book.charge[q], book.discharge[q], DT_ID, params)
    return e


class Backtest:
    """
    Step-wise execution of the trading calendar.

    `run()` executes every event and returns the finished portfolio. `problem_for(event)` builds
    the strategy problem an event would solve given the state reached so far.
    """

    def __init__(self, config: BacktestConfig, data: MarketData) -> None:
        self.config = config
        self.data = data
        data.check_covers(config.timeline)
        if config.forecast_idc is ForecastMode.NOISY_ID1 and config.sigma == 0:
            logger.warning("noisy ID1 forecast with sigma=0 equals the perfect forecast")
        self.events = build_event_calendar(config.timeline, config.n_p)
        self.book = PositionBook.empty(config.timeline.Q)
        self.portfolio = Portfolio(config.battery, config.timeline)
        self._soc = np.full(config.timeline.Q + 1, np.nan)
        self._soc[0] = config.battery.e_init
        self._soc_until = 0
        self._executed = 0

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(timeline={self.config.timeline}, executed={self._executed}/{len(self.events)})"

    @property
    def pending(self) -> list[TradingEvent]:
        return self.events[self._executed :]

    def soc_at(self, q: int) -> float:
        """Physical SOC at the start of quarter `q`. Quarters before `q` must be frozen."""
        params = self.config.battery
        while self._soc_until < q:
            i = self._soc_until
            self._soc[i + 1] = step_soc(
                self._soc[i], self.book.charge[i], self.book.discharge[i], DT_ID, params
            )
            self._soc_until += 1
        return float(self._soc[q])

    def forecast_for(self, event: TradingEvent) -> Forecast:
        config, data = self.config, self.data
        segment = event.segment
        if event.kind is EventKind.DAA_AUCTION:
            mode = config.forecast_daa
        elif event.kind is EventKind.IDA_AUCTION:
            mode = config.forecast_ida
        else:
            mode = config.forecast_idc
        window = slice(event.window.start, event.window.stop)
        actual = data.actual(segment)[window]
        if mode is ForecastMode.PERFECT:
            return perfect_forecast(actual, segment)
        if mode is ForecastMode.FROM_FILE:
            return Forecast(segment, data.forecast(segment)[window])
        return noisy_id1_forecast(actual, config.sigma, config.seed, event=event.fire_index)

    def problem_for(self, event: TradingEvent, forecast: Forecast | None = None) -> MilpProblem:
        params = self.config.battery
        forecast = forecast or self.forecast_for(event)
        if event.kind is EventKind.DAA_AUCTION:
            return build_daa(params, forecast)
        if event.kind is EventKind.IDA_AUCTION:
            return build_ida(params, forecast, self.book)
        e_start = float(np.clip(self.soc_at(event.fire_index), 0.0, params.e_max))
        return build_idc(
            params, forecast, self.book, e_start, event.fire_index, self.config.n_p, self.config.timeline
        )

    def execute(self, event: TradingEvent) -> EventRecord:
        """
        Build, solve and settle one event, then update the book.

        Raises:
            InfeasibleEventError: If the event's problem has no feasible solution.
            SolverError: If the solver fails otherwise or a solution violates its problem.
            BookkeepingError: If the signals would modify frozen quarters.
        """
        forecast = self.forecast_for(event)
        problem = self.problem_for(event, forecast)
        solution = solve(problem, backend=self.config.backend)
        if solution.status is SolveStatus.INFEASIBLE:
            raise InfeasibleEventError(event.label)
        if not solution.is_optimal:
            raise SolverError(f"event {event.label}: solver returned {solution.status.value}")
        if self.config.check_solutions:
            violations = check_solution(problem, solution)
            if violations:
                raise SolverError(f"event {event.label}: solution violates {violations[0].name} by {violations[0].magnitude:.3g}")

        segment = event.segment
        signals = extract_signals(segment, solution)
        if segment is not MarketSegment.DAA and signals.start < event.fire_index:
            raise BookkeepingError(f"event {event.label} trades frozen quarter {signals.start}")
        trades, cash = settle(signals, self.data.actual(segment), booked_at=event.fire_index)
        self.portfolio.record(trades, segment)
        self.book = apply_trades_to_book(self.book, signals)

        actual = self.data.actual(segment)[event.window.start : event.window.stop]
        record = EventRecord(
            label=event.label,
            kind=event.kind,
            fire_index=event.fire_index,
            forecast_revenue=signals.forecast_revenue,
            cash=cash,
            n_trades=len(trades),
            forecast_mae=mae(forecast.values, actual),
            forecast_rmse=rmse(forecast.values, actual),
        )
        self.portfolio.events.append(record)
        self._executed += 1
        logger.debug(
            "{} objective={:.4f} trades={} cash={:.4f}", event.label, solution.objective_value, len(trades), cash
        )
        return record

    def run(self) -> Portfolio:
        timeline = self.config.timeline
        logger.info("backtest start={} hours={} events={}", timeline.start, timeline.H, len(self.events))
        for event in self.pending:
            self.execute(event)
        Q = timeline.Q
        self.soc_at(Q)
        self.portfolio.position_book = self.book
        self.portfolio.soc_trajectory = SocTrajectory(self._soc.copy(), DT_ID)
        cash = self.portfolio.cash_by_segment
        logger.info(
            "backtest done: DAA={:.2f} IDA={:.2f} IDC={:.2f} total={:.2f}",
            cash[MarketSegment.DAA],
            cash[MarketSegment.IDA],
            cash[MarketSegment.IDC],
            self.portfolio.revenue_total,
        )
        return self.portfolio


def run_backtest(config: BacktestConfig, data: MarketData) -> Portfolio:
    """
    Run the full cascade: the DAA, then the IDA, then one rolling IDC event per quarter.

    Args:
        config (BacktestConfig): Battery, timeline, horizon and forecast sources.
        data (MarketData): Actual prices (and file forecasts when used) covering the timeline.

    Raises:
        DataError: If the data does not cover the timeline or a file forecast is missing.
        InfeasibleEventError: If a strategy problem is infeasible.
    """
    return Backtest(config, data).run()


def audit_portfolio(portfolio: Portfolio, tol: float = FEASIBILITY_TOL) -> list[str]:
    """
    Post-hoc checks of a finished backtest.

    Reports SOC outside [0, e_max], quarters that both charge and discharge, positions above
    `p_max` and cash that does not add up to the trade log. An empty list means the
    portfolio is consistent.
    """
    params = portfolio.battery
    problems = []
    if portfolio.soc_trajectory is not None:
        for q in portfolio.soc_trajectory.violations(params, tol):
            problems.append(f"soc[{q}] = {portfolio.soc_trajectory[q]:.6f} outside [0, {params.e_max}]")
    book = portfolio.position_book
    if book is not None:
        both = np.flatnonzero((book.charge > tol) & (book.discharge > tol))
        problems.extend(f"quarter {q} both charges and discharges" for q in both)
        problems.extend(book.check(params, tol))
    for segment in MarketSegment:
        expected = sum(i.cash for i in portfolio.trades_of(segment))
        if abs(expected - portfolio.cash_by_segment[segment]) > tol:
            problems.append(f"{segment.value} cash {portfolio.cash_by_segment[segment]:.6f} != trade log {expected:.6f}")
    return problems


__all__ = [
    "Side",
    "ForecastMode",
    "Trade",
    "EventRecord",
    "BacktestConfig",
    "Portfolio",
    "Backtest",
    "settle",
    "apply_trades_to_book",
    "physical_soc_at",
    "run_backtest",
    "audit_portfolio",
]
