from dataclasses import dataclass, field

import numpy as np

from cascadebess.battery import BatteryParams, step_soc
from cascadebess.constants import DT_ID, FEASIBILITY_TOL, QUARTERS_PER_HOUR, ZERO_TOL
from cascadebess.errors import ConfigurationError, SignalExtractionError, ValidationError
from cascadebess.milp import MilpProblem, MilpSolution, Sense, var_name
from cascadebess.timeline import MarketSegment, Timeline


@dataclass
class Forecast:
    """
    Price forecast over the delivery grid an event trades.

    Attributes:
        segment (MarketSegment): Segment the prices belong to.
        values (np.ndarray): Prices in EUR/MWh. Negative prices are allowed.
    """

    segment: MarketSegment
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(segment='{self.segment.value}', periods={len(self)})"


@dataclass
class PositionBook:
    """
    Gross charge (bought) and discharge (sold) power per delivery quarter, accumulated over
    all markets traded so far.
    """

    charge: np.ndarray
    discharge: np.ndarray

    def __post_init__(self) -> None:
        self.charge = np.asarray(self.charge, dtype=float)
        self.discharge = np.asarray(self.discharge, dtype=float)
        if self.charge.shape != self.discharge.shape:
            raise ValidationError("charge and discharge positions must have the same length")

    def __len__(self) -> int:
        return len(self.charge)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(quarters={len(self)}, bought={self.charge.sum() / QUARTERS_PER_HOUR:.3f} MWh, sold={self.discharge.sum() / QUARTERS_PER_HOUR:.3f} MWh)"

    @classmethod
    def empty(cls, Q: int) -> "PositionBook":
        return cls(np.zeros(Q), np.zeros(Q))

    def copy(self) -> "PositionBook":
        return PositionBook(self.charge.copy(), self.discharge.copy())

    @property
    def net(self) -> np.ndarray:
        """Net power per quarter (positive = charging)."""
        return self.charge - self.discharge

    def window(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        return self.charge[start:stop], self.discharge[start:stop]

    def check(self, params: BatteryParams, tol: float = FEASIBILITY_TOL) -> list[str]:
        """Describe every quarter where a gross position is negative or above `p_max`."""
        problems = []
        for name, values in (("charge", self.charge), ("discharge", self.discharge)):
            for q in np.flatnonzero((values < -tol) | (values > params.p_max + tol)):
                problems.append(f"{name}[{q}] = {values[q]:.6f}")
        return problems


@dataclass
class Signals:
    """
    Trading signals extracted from a solved strategy problem.

    Arrays are indexed relative to `start`. DAA signals are hourly and carry zero-length
    closing arrays.
    """

    segment: MarketSegment
    start: int
    new_charge: np.ndarray
    new_dis: np.ndarray
    close_charge: np.ndarray = field(default_factory=lambda: np.zeros(0))
    close_dis: np.ndarray = field(default_factory=lambda: np.zeros(0))
    forecast_revenue: float = 0.0

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(segment='{self.segment.value}', start={self.start}, periods={self.periods}, forecast_revenue={self.forecast_revenue:.2f})"

    @property
    def periods(self) -> int:
        return len(self.new_charge)

    @property
    def dt(self) -> float:
        return self.segment.dt

    @property
    def is_empty(self) -> bool:
        arrays = (self.new_charge, self.new_dis, self.close_charge, self.close_dis)
        return not any(np.any(a > 0) for a in arrays)

    def _close(self, values: np.ndarray) -> np.ndarray:
        return values if len(values) else np.zeros(self.periods)

    @property
    def bought(self) -> np.ndarray:
        """Total buy power per period (new charge plus closing buys)."""
        return self.new_charge + self._close(self.close_charge)

    @property
    def sold(self) -> np.ndarray:
        """Total sell power per period (new discharge plus closing sells)."""
        return self.new_dis + self._close(self.close_dis)


def hourly_to_quarters(values) -> np.ndarray:
    """Spread hourly powers onto the quarter grid (power is constant over the hour)."""
    return np.repeat(np.asarray(values, dtype=float), QUARTERS_PER_HOUR)


def _add_power_variables(problem: MilpProblem, prefix: str, n: int, upper: float) -> list[int]:
    return [problem.add_variable(var_name(prefix, t), lower=0.0, upper=upper) for t in range(n)]


def build_daa(params: BatteryParams, forecast: Forecast, exclusive: bool = True) -> MilpProblem:
    """
    Build the Day-Ahead Auction problem over all hours of the test period.

    Minimises the forecast cost of the hourly charge/discharge schedule subject to the SOC
    balance, capacity, power limits with mutual exclusion and the cycle budgets.

    Args:
        params (BatteryParams): Battery parameters.
        forecast (Forecast): Hourly DAA price forecast.
        exclusive (bool, optional): Add the binary that forbids simultaneous charging and
            discharging. Disabling it turns the problem into a plain LP.

    Raises:
        ConfigurationError: If the forecast is empty.
    """
    H = len(forecast)
    if H == 0:
        raise ConfigurationError("DAA forecast covers no hours")
    dt = MarketSegment.DAA.dt
    prices = forecast.values
    problem = MilpProblem("daa", meta={"segment": MarketSegment.DAA, "start": 0, "periods": H})

    p_ch = _add_power_variables(problem, "p_ch", H, params.p_max)
    p_dis = _add_power_variables(problem, "p_dis", H, params.p_max)
    e = [problem.add_variable(var_name("e", h), lower=0.0, upper=params.e_max) for h in range(H + 1)]
    x = [problem.add_binary(var_name("x", h)) for h in range(H)] if exclusive else []

    problem.set_objective(
        {**{p_ch[h]: prices[h] * dt for h in range(H)}, **{p_dis[h]: -prices[h] * dt for h in range(H)}}
    )
    problem.add_constraint("soc_init", {e[0]: 1.0}, Sense.EQ, params.e_init)
    retention = params.retention(dt)
    for h in range(H):
        problem.add_constraint(
            f"soc_step_{h}",
            {
                e[h + 1]: 1.0,
                e[h]: -retention,
                p_ch[h]: -params.eta_ch * dt,
                p_dis[h]: dt / params.eta_dis,
            },
            Sense.EQ,
            0.0,
        )
        if exclusive:
            problem.add_constraint(
                f"excl_ch_{h}", {p_ch[h]: 1.0, x[h]: -params.p_max}, Sense.LE, 0.0
            )
            problem.add_constraint(
                f"excl_dis_{h}", {p_dis[h]: 1.0, x[h]: params.p_max}, Sense.LE, params.p_max
            )

    budget = params.cycle_budget(H * dt)
    problem.add_constraint(
        "budget_ch", {p_ch[h]: dt * params.eta_ch for h in range(H)}, Sense.LE, budget
    )
    problem.add_constraint(
        "budget_dis", {p_dis[h]: dt / params.eta_dis for h in range(H)}, Sense.LE, budget
    )
    return problem


def terminal_soc_bounds(
    params: BatteryParams, tail_ch: np.ndarray, tail_dis: np.ndarray, dt: float = DT_ID
) -> tuple[float, float]:
    """
    Range of window-end SOCs from which the positions booked after the window stay inside
    [0, e_max].

    The SOC after j more steps is r^j * e + s_j (r = retention per step, s_j the booked
    flows folded forward), so every step contributes one lower and one upper bound on e.

    Example:
        ```python
        >>> params = BatteryParams(p_max=1, e_max=1, eta_ch=1, eta_dis=1, gamma_month=0)
        >>> terminal_soc_bounds(params, np.array([0.0, 0.0]), np.array([1.0, 1.0]))
        (0.5, 1.0)
        ```
    """
    tail_ch = np.asarray(tail_ch, dtype=float)
    tail_dis = np.asarray(tail_dis, dtype=float)
    if len(tail_ch) == 0:
        return 0.0, params.e_max
    r = params.retention(dt)
    flows = tail_ch * params.eta_ch * dt - tail_dis * dt / params.eta_dis
    growth = r ** -np.arange(1, len(flows) + 1, dtype=float)
    # s_j / r^j
    scaled = np.cumsum(flows * growth)
    lower = max(0.0, float(np.max(-scaled)))
    upper = min(params.e_max, float(np.min(params.e_max * growth - scaled)))
    return lower, upper


def _build_intraday(
    name: str,
    segment: MarketSegment,
    params: BatteryParams,
    prices: np.ndarray,
    existing_ch: np.ndarray,
    existing_dis: np.ndarray,
    e_start: float,
    start: int,
    end_bounds: tuple[float, float] | None = None,
) -> MilpProblem:
    """
    Intraday problem with new-trade and closing variables on top of an existing position.

    Closing buys reduce the existing sell position and closing sells the existing buy
    position, so the SOC balance and the exclusion binary act on the net flows
        net_ch  = existing_ch  - close_dis + p_ch
        net_dis = existing_dis - close_ch  + p_dis

    `end_bounds` limits the SOC at the end of the window.
    """
    W = len(prices)
    dt = segment.dt
    eta_ch, eta_dis, p_max = params.eta_ch, params.eta_dis, params.p_max
    problem = MilpProblem(name, meta={"segment": segment, "start": start, "periods": W})

    p_ch = _add_power_variables(problem, "p_ch", W, p_max)
    p_dis = _add_power_variables(problem, "p_dis", W, p_max)
    close_ch = _add_power_variables(problem, "close_ch", W, p_max)
    close_dis = _add_power_variables(problem, "close_dis", W, p_max)
    e = [problem.add_variable(var_name("e", q), lower=0.0, upper=params.e_max) for q in range(W + 1)]
    x = [problem.add_binary(var_name("x", q)) for q in range(W)]

    objective: dict[int, float] = {}
    for q in range(W):
        objective[p_ch[q]] = prices[q] * dt
        objective[p_dis[q]] = -prices[q] * dt
        objective[close_ch[q]] = prices[q] * dt
        objective[close_dis[q]] = -prices[q] * dt
    problem.set_objective(objective)

    problem.add_constraint("soc_init", {e[0]: 1.0}, Sense.EQ, e_start)
    retention = params.retention(dt)
    for q in range(W):
        ex_ch, ex_dis = float(existing_ch[q]), float(existing_dis[q])
        problem.add_constraint(
            f"soc_step_{q}",
            {
                e[q + 1]: 1.0,
                e[q]: -retention,
                p_ch[q]: -eta_ch * dt,
                close_dis[q]: eta_ch * dt,
                p_dis[q]: dt / eta_dis,
                close_ch[q]: -dt / eta_dis,
            },
            Sense.EQ,
            ex_ch * eta_ch * dt - ex_dis * dt / eta_dis,
        )
        problem.add_constraint(f"cap_ch_{q}", {p_ch[q]: 1.0}, Sense.LE, max(p_max - ex_ch, 0.0))
        problem.add_constraint(f"cap_dis_{q}", {p_dis[q]: 1.0}, Sense.LE, max(p_max - ex_dis, 0.0))
        problem.add_constraint(f"close_ch_{q}", {close_ch[q]: 1.0}, Sense.LE, max(ex_dis, 0.0))
        problem.add_constraint(f"close_dis_{q}", {close_dis[q]: 1.0}, Sense.LE, max(ex_ch, 0.0))
        problem.add_constraint(
            f"excl_ch_{q}",
            {p_ch[q]: 1.0, close_dis[q]: -1.0, x[q]: -p_max},
            Sense.LE,
            -ex_ch,
        )
        problem.add_constraint(
            f"excl_dis_{q}",
            {p_dis[q]: 1.0, close_ch[q]: -1.0, x[q]: p_max},
            Sense.LE,
            p_max - ex_dis,
        )

    # Budgets never force unwinding volume that is already committed inside the window.
    budget = params.cycle_budget(W * dt)
    committed_ch = float(np.sum(existing_ch)) * eta_ch * dt
    committed_dis = float(np.sum(existing_dis)) * dt / eta_dis
    coefs_ch = {p_ch[q]: eta_ch * dt for q in range(W)}
    coefs_ch.update({close_dis[q]: -eta_ch * dt for q in range(W)})
    problem.add_constraint("budget_ch", coefs_ch, Sense.LE, max(budget, committed_ch) - committed_ch)
    coefs_dis = {p_dis[q]: dt / eta_dis for q in range(W)}
    coefs_dis.update({close_ch[q]: -dt / eta_dis for q in range(W)})
    problem.add_constraint("budget_dis", coefs_dis, Sense.LE, max(budget, committed_dis) - committed_dis)

    if end_bounds is not None:
        lower, upper = end_bounds
        problem.add_constraint("soc_end_min", {e[W]: 1.0}, Sense.GE, lower)
        problem.add_constraint("soc_end_max", {e[W]: 1.0}, Sense.LE, upper)
    return problem


def build_ida(params: BatteryParams, forecast: Forecast, daa_position: PositionBook) -> MilpProblem:
    """
    Build the Intraday Auction problem over all quarters, on top of the DAA position.

    Args:
        params (BatteryParams): Battery parameters.
        forecast (Forecast): Quarter-hourly IDA price forecast.
        daa_position (PositionBook): DAA position spread onto quarters.

    Raises:
        ValidationError: If the position and the forecast cover different numbers of quarters.
    """
    if len(daa_position) != len(forecast):
        raise ValidationError(
            f"DAA position covers {len(daa_position)} quarters, IDA forecast {len(forecast)}"
        )
    if len(forecast) == 0:
        raise ValidationError("IDA forecast covers no quarters")
    return _build_intraday(
        "ida",
        MarketSegment.IDA,
        params,
        forecast.values,
        daa_position.charge,
        daa_position.discharge,
        params.e_init,
        start=0,
    )


def build_idc(
    params: BatteryParams,
    forecast: Forecast,
    book: PositionBook,
    e_init_window: float,
    q_i: int,
    n_p: int,
    timeline: Timeline,
) -> MilpProblem:
    """
    Build the rolling-horizon Intraday Continuous problem for the window starting at `q_i`.

    Args:
        params (BatteryParams): Battery parameters.
        forecast (Forecast): ID1 forecast for the window (length min(n_p, Q - q_i)).
        book (PositionBook): All positions so far (DAA, IDA and earlier IDC trades).
        e_init_window (float): Physical SOC at the start of quarter `q_i`.
        q_i (int): Quarter at which the event fires.
        n_p (int): Prediction horizon in quarters.
        timeline (Timeline): The test window.

    Raises:
        ValidationError: If the window is empty or the inputs do not cover it.
    """
    W = min(n_p, timeline.Q - q_i)
    if W <= 0 or q_i < 0:
        raise ValidationError(f"IDC window at quarter {q_i} is empty (Q={timeline.Q}, n_p={n_p})")
    if len(forecast) != W:
        raise ValidationError(f"IDC forecast covers {len(forecast)} quarters, window needs {W}")
    if len(book) != timeline.Q:
        raise ValidationError(f"position book covers {len(book)} quarters, timeline has {timeline.Q}")
    existing_ch, existing_dis = book.window(q_i, q_i + W)
    lower, upper = terminal_soc_bounds(params, *book.window(q_i + W, timeline.Q))
    # the untouched book must stay feasible
    e_hold = e_init_window
    for ch, dis in zip(existing_ch, existing_dis):
        e_hold = step_soc(e_hold, ch, dis, DT_ID, params)
    lower, upper = min(lower, e_hold), max(upper, e_hold)
    return _build_intraday(
        f"idc_{q_i}",
        MarketSegment.IDC,
        params,
        forecast.values,
        existing_ch,
        existing_dis,
        e_init_window,
        start=q_i,
        end_bounds=(lower, upper),
    )


def _clean(values: np.ndarray) -> np.ndarray:
    values = np.where(values < ZERO_TOL, 0.0, values)
    return values


def extract_signals(problem_kind: MarketSegment, solution: MilpSolution) -> Signals:
    """
    Pull the trade powers out of an optimal strategy solution.

    Energy volumes are power times the segment resolution (1 h for the DAA, 0.25 h
    otherwise). Values below 1e-9 MW are treated as zero.

    Raises:
        SignalExtractionError: If the solution is not optimal or belongs to another segment.
    """
    if not solution.is_optimal:
        raise SignalExtractionError(f"cannot extract {problem_kind.value} signals from a {solution.status.value} solution")
    segment = solution.meta.get("segment", problem_kind)
    if segment is not problem_kind:
        raise SignalExtractionError(f"solution belongs to {segment.value}, not {problem_kind.value}")
    n = solution.meta["periods"]
    signals = Signals(
        segment=problem_kind,
        start=solution.meta.get("start", 0),
        new_charge=_clean(solution.values("p_ch", n)),
        new_dis=_clean(solution.values("p_dis", n)),
        forecast_revenue=-solution.objective_value,
    )
    if problem_kind is not MarketSegment.DAA:
        signals.close_charge = _clean(solution.values("close_ch", n))
        signals.close_dis = _clean(solution.values("close_dis", n))
    return signals


__all__ = [
    "Forecast",
    "PositionBook",
    "Signals",
    "hourly_to_quarters",
    "terminal_soc_bounds",
    "build_daa",
    "build_ida",
    "build_idc",
    "extract_signals",
]
