import itertools
import math
from typing import Literal

import numpy as np
from scipy.optimize import linprog

from cascadebess.battery import BatteryParams
from cascadebess.data_io import MarketData
from cascadebess.engine import BacktestConfig
from cascadebess.milp import MilpProblem
from cascadebess.timeline import MarketSegment, Timeline

START = "2023-03-01"


def oracle_params(eta: float = 1.0, p_max: float = 1.0, fill: float = 1.0, n_cyc: float = 24.0) -> BatteryParams:
    """
    Battery whose optimal DAA schedule only visits the empty and the full state.

    A full charge or discharge fits into one hour (e_max <= eta * p_max), there is no
    self-discharge and the cycle budget never binds.
    """
    return BatteryParams(
        p_max=p_max,
        e_max=eta * p_max * fill,
        eta_ch=eta,
        eta_dis=eta,
        gamma_month=0.0,
        n_cyc=n_cyc,
        e_init=0.0,
    )


def daa_dp_oracle(prices, params: BatteryParams) -> float:
    """Minimum DAA cost by dynamic programming over the states empty/full."""
    fill_cost = params.e_max / params.eta_ch
    empty_gain = params.e_max * params.eta_dis
    empty, full = 0.0, math.inf
    for price in prices:
        empty, full = min(empty, full - price * empty_gain), min(full, empty + price * fill_cost)
    return min(empty, full)


def enumerate_milp(problem: MilpProblem) -> float:
    """Minimum objective over every binary pattern, each fixed pattern solved as an LP."""
    c, A, row_lower, row_upper, lower, upper, _ = problem.arrays()
    A = A.toarray()
    has_upper, has_lower = np.isfinite(row_upper), np.isfinite(row_lower)
    A_ub = np.vstack([A[has_upper], -A[has_lower]])
    b_ub = np.concatenate([row_upper[has_upper], -row_lower[has_lower]])
    binaries = problem.binaries
    best = math.inf
    for pattern in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lo, up = lower.copy(), upper.copy()
        lo[binaries] = pattern
        up[binaries] = pattern
        bounds = [(None if math.isinf(a) else a, None if math.isinf(b) else b) for a, b in zip(lo, up)]
        result = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None, bounds=bounds, method="highs")
        if result.status == 0:
            best = min(best, float(result.fun))
    return best + problem.objective_constant


def make_market(daa, ida=None, id1=None, start: str = START, forecasts=None) -> MarketData:
    """Market data from plain arrays. IDA and ID1 default to the DAA prices on quarters."""
    daa = np.asarray(daa, dtype=float)
    ida = np.repeat(daa, 4) if ida is None else np.asarray(ida, dtype=float)
    id1 = ida.copy() if id1 is None else np.asarray(id1, dtype=float)
    return MarketData(Timeline(start, len(daa)), daa, ida, id1, forecasts or {})


def flat_market(hours: int, price: float) -> MarketData:
    return make_market(np.full(hours, price))


def valley_peak(hours: int = 6) -> np.ndarray:
    prices = np.full(hours, 60.0)
    prices[1] = 10.0
    prices[hours - 2] = 140.0
    return prices


def small_config(data: MarketData, params: BatteryParams | None = None, **kwargs) -> BacktestConfig:
    kwargs.setdefault("n_p", 8)
    return BacktestConfig(battery=params or BatteryParams(), timeline=data.timeline, **kwargs)


def quarter_cash(portfolio, segment: MarketSegment) -> np.ndarray:
    cash = np.zeros(portfolio.timeline.periods(segment))
    for trade in portfolio.trades_of(segment):
        cash[trade.delivery_index] += trade.cash
    return cash


def cmd_example_run(
    config: str,
    n_p: int = 96,
    sigma: tuple[float, ...] = (0.1, 0.2),
    mode: Literal["fast", "exact"] = "fast",
    verbose: bool = False,
    out: str | None = None,
) -> int:
    """
    Example command docstring.

    Longer description that is not used as help.

    Args:
        config: Configuration file.
        n_p: Prediction horizon.
        sigma: Noise levels.
        mode: Solve mode.
        verbose: Print more.
        out: Output directory.
    """
    return n_p + len(sigma) + (100 if verbose else 0) + (1000 if mode == "exact" else 0)


def cmd_bare(x, y=1.5):
    return 0
