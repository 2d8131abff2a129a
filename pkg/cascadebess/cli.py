import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Literal

from loguru import logger

from cascadebess.config import RunConfig
from cascadebess.command import Command, build_parser
from cascadebess.constants import NOISE_SWEEP
from cascadebess.data_io import MarketData, load_forecasts, load_market_csv
from cascadebess.engine import Backtest, Portfolio, run_backtest
from cascadebess.errors import (
    BookkeepingError,
    ConfigurationError,
    DataError,
    SignalExtractionError,
    SolverError,
    ValidationError,
)
from cascadebess.reporting import (
    revenue_report,
    sensitivity_report,
    write_day_traces,
    write_events_csv,
    write_soc_csv,
    write_trades_csv,
)
from cascadebess.timeline import MarketSegment, find_event

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> <level>{level: <8}</level> {message}"


def _color() -> bool:
    return sys.stdout.isatty()


def load_inputs(config: str, data: str) -> tuple[RunConfig, MarketData]:
    """Read the run configuration and the market data it refers to."""
    cfg = RunConfig.from_file(config)
    market = load_market_csv(data, cfg.timeline(), cfg.timezone)
    if cfg.forecast_file:
        path = cfg.forecast_file
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(os.path.abspath(config)), path)
        forecasts = load_forecasts(path, market.timeline, cfg.timezone)
        market = dataclasses.replace(market, forecasts={**market.forecasts, **forecasts})
    return cfg, market


def cmd_run(config: str, data: str, out: str = "reports", breakdown: Literal["day", "month", "year"] = "day") -> int:
    """
    Run a backtest and write its reports.

    Args:
        config: Run configuration file (key = value lines).
        data: Market data CSV.
        out: Output directory.
        breakdown: Period of the revenue breakdown.
    """
    cfg, market = load_inputs(config, data)
    portfolio = run_backtest(cfg.backtest_config(market.timeline), market)
    os.makedirs(out, exist_ok=True)
    report = revenue_report(portfolio, by=breakdown)
    report.to_csv(os.path.join(out, "revenue.csv"))
    report.breakdown_to_csv(os.path.join(out, f"revenue_by_{breakdown}.csv"))
    write_trades_csv(portfolio, os.path.join(out, "trades.csv"))
    write_soc_csv(portfolio, os.path.join(out, "soc.csv"))
    write_events_csv(portfolio, os.path.join(out, "events.csv"))
    traces = write_day_traces(portfolio, market, out)
    print(report.as_str(color=_color()))
    logger.info("reports written to {} ({} day traces)", out, len(traces))
    return EXIT_OK


def sweep_scenarios(
    cfg: RunConfig, market: MarketData, sigma: tuple[float, ...], seed: tuple[int, ...]
) -> list[tuple[str, RunConfig]]:
    """
    The forecast scenario ladder: perfect foresight, then the file DAA forecast, then file DAA
    and IDA forecasts, then noisy ID1 forecasts for every sigma and seed. File scenarios are
    skipped when the data has no such forecast. Noisy scenarios keep the file forecasts that
    are available.
    """
    perfect = {"forecast_daa": "perfect", "forecast_ida": "perfect", "forecast_idc": "perfect"}
    scenarios = [("PF", cfg.updated(**perfect))]
    base = dict(perfect)
    if market.has_forecast(MarketSegment.DAA):
        base["forecast_daa"] = "file"
        scenarios.append(("DAA forecast", cfg.updated(**base)))
        if market.has_forecast(MarketSegment.IDA):
            base["forecast_ida"] = "file"
            scenarios.append(("DAA+IDA forecast", cfg.updated(**base)))
    for s in sigma:
        for n in seed:
            noisy = cfg.updated(**{**base, "forecast_idc": "noisy", "sigma": s, "seed": n})
            scenarios.append((f"ID1 sigma={s:g}", noisy))
    return scenarios


def run_scenario(job: tuple[RunConfig, MarketData]) -> Portfolio:
    cfg, market = job
    return run_backtest(cfg.backtest_config(market.timeline), market)


def cmd_sweep(
    config: str,
    data: str,
    sigma: tuple[float, ...] = NOISE_SWEEP,
    seed: tuple[int, ...] = (0,),
    out: str = "sweep",
    workers: int = 1,
) -> int:
    """
    Run the forecast uncertainty sweep and write the sensitivity report.

    Args:
        config: Run configuration file (key = value lines).
        data: Market data CSV, optionally with forecast rows.
        sigma: Relative ID1 forecast volatilities.
        seed: Seeds of the noisy ID1 forecasts. Runs of one sigma are reduced to their median.
        out: Output directory.
        workers: Number of worker processes.
    """
    if workers < 1:
        raise ConfigurationError(f"workers must be at least 1, got {workers}")
    cfg, market = load_inputs(config, data)
    scenarios = sweep_scenarios(cfg, market, sigma, seed)
    jobs = [(scenario, market) for _, scenario in scenarios]
    logger.info("sweep: {} runs on {} worker(s)", len(jobs), workers)
    if workers == 1:
        portfolios = [run_scenario(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            portfolios = list(pool.map(run_scenario, jobs))
    report = sensitivity_report([(label, p) for (label, _), p in zip(scenarios, portfolios)])
    os.makedirs(out, exist_ok=True)
    report.to_csv(os.path.join(out, "sensitivity.csv"))
    print(report.as_str(color=_color()))
    logger.info("sensitivity report written to {}", out)
    return EXIT_OK


def cmd_validate(data: str, timezone: str | None = None) -> int:
    """
    Check a market data file without running anything.

    Args:
        data: Market data CSV.
        timezone: Zone of naive timestamps.
    """
    market = load_market_csv(data, timezone=timezone)
    forecasts = ", ".join(i.value for i in market.forecasts) or "none"
    print(f"{data}: {market.timeline.H} hours from {market.timeline.start.isoformat()}, forecasts: {forecasts}")
    return EXIT_OK


def cmd_dump_lp(config: str, data: str, event: str = "daa", out: str | None = None) -> int:
    """
    Write the optimisation problem of one trading event in LP format.

    Earlier events are executed first so the problem sees the positions the backtest would
    have at that point.

    Args:
        config: Run configuration file (key = value lines).
        data: Market data CSV.
        event: Event label: daa, ida or idc:<quarter>.
        out: Output file. Printed to stdout when omitted.
    """
    cfg, market = load_inputs(config, data)
    backtest = Backtest(cfg.backtest_config(market.timeline), market)
    try:
        target = find_event(backtest.events, event)
    except KeyError as e:
        raise ValidationError(f"unknown event '{event}' (expected daa, ida or idc:0..{market.timeline.Q - 1})") from e
    for pending in backtest.pending:
        if pending is target:
            break
        backtest.execute(pending)
    text = backtest.problem_for(target).to_lp_text()
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info("wrote {} to {}", target.label, out)
    return EXIT_OK


COMMANDS = [Command(cmd_run), Command(cmd_sweep), Command(cmd_validate), Command(cmd_dump_lp)]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser(
        COMMANDS,
        prog="cascadebess",
        description="Backtest cascaded DAA, IDA and IDC battery trading strategies.",
    )
    args = parser.parse_args(argv)
    logger.remove()
    logger.add(sys.stderr, level=args.log_level, format=LOG_FORMAT)
    logger.enable("cascadebess")
    try:
        return args.command.call(args)
    except (ConfigurationError, DataError, ValidationError, OSError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except (SolverError, BookkeepingError, SignalExtractionError) as e:
        logger.error(str(e))
        return EXIT_SOLVER


__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_validate", "cmd_dump_lp", "sweep_scenarios", "load_inputs"]
