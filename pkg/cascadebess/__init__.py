from loguru import logger

from cascadebess.battery import BatteryParams, SocTrajectory, gamma_per_step, step_soc
from cascadebess.config import RunConfig
from cascadebess.data_io import (
    MarketData,
    load_market_csv,
    mae,
    noisy_id1_forecast,
    perfect_forecast,
    rmse,
    synthetic_market_data,
    write_market_csv,
)
from cascadebess.engine import (
    Backtest,
    BacktestConfig,
    ForecastMode,
    Portfolio,
    Trade,
    apply_trades_to_book,
    audit_portfolio,
    physical_soc_at,
    run_backtest,
    settle,
)
from cascadebess.errors import (
    BookkeepingError,
    CascadeError,
    ConfigurationError,
    DataError,
    InfeasibleEventError,
    SignalExtractionError,
    SolverError,
    ValidationError,
)
from cascadebess.milp import MilpProblem, MilpSolution, check_solution, solve
from cascadebess.reporting import day_trace, revenue_report, sensitivity_report
from cascadebess.strategies import (
    Forecast,
    PositionBook,
    Signals,
    build_daa,
    build_ida,
    build_idc,
    extract_signals,
)
from cascadebess.timeline import MarketSegment, Timeline, build_event_calendar, hour_of_quarter

logger.disable("cascadebess")

__all__ = [
    "BatteryParams",
    "SocTrajectory",
    "gamma_per_step",
    "step_soc",
    "RunConfig",
    "MarketData",
    "load_market_csv",
    "write_market_csv",
    "perfect_forecast",
    "noisy_id1_forecast",
    "mae",
    "rmse",
    "synthetic_market_data",
    "Backtest",
    "BacktestConfig",
    "ForecastMode",
    "Portfolio",
    "Trade",
    "settle",
    "apply_trades_to_book",
    "physical_soc_at",
    "run_backtest",
    "audit_portfolio",
    "CascadeError",
    "ConfigurationError",
    "DataError",
    "ValidationError",
    "SolverError",
    "InfeasibleEventError",
    "SignalExtractionError",
    "BookkeepingError",
    "MilpProblem",
    "MilpSolution",
    "solve",
    "check_solution",
    "revenue_report",
    "day_trace",
    "sensitivity_report",
    "Forecast",
    "PositionBook",
    "Signals",
    "build_daa",
    "build_ida",
    "build_idc",
    "extract_signals",
    "MarketSegment",
    "Timeline",
    "build_event_calendar",
    "hour_of_quarter",
]
