import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from examples import (
    daa_dp_oracle,
    flat_market,
    make_market,
    oracle_params,
    quarter_cash,
    small_config,
    valley_peak,
)

from cascadebess.battery import BatteryParams
from cascadebess.cli import run_scenario
from cascadebess.config import build_config
from cascadebess.constants import NOISE_SWEEP
from cascadebess.data_io import synthetic_market_data
from cascadebess.engine import (
    Backtest,
    BacktestConfig,
    ForecastMode,
    Portfolio,
    Side,
    Trade,
    apply_trades_to_book,
    audit_portfolio,
    physical_soc_at,
    run_backtest,
    settle,
)
from cascadebess.errors import BookkeepingError, ConfigurationError, DataError
from cascadebess.reporting import sensitivity_report
from cascadebess.strategies import PositionBook, Signals
from cascadebess.timeline import EventKind, MarketSegment, Timeline

DAA, IDA, IDC = MarketSegment.DAA, MarketSegment.IDA, MarketSegment.IDC


def idc_signals(start, new_charge=0.0, new_dis=0.0, close_charge=0.0, close_dis=0.0) -> Signals:
    return Signals(
        IDC,
        start,
        np.array([new_charge]),
        np.array([new_dis]),
        np.array([close_charge]),
        np.array([close_dis]),
    )


class TestSettle:
    def test_daa_buy(self):
        signals = Signals(DAA, 0, np.array([1.0]), np.array([0.0]))
        trades, cash = settle(signals, [50.0])
        assert cash == -50.0
        assert trades == [Trade(DAA, 0, Side.BUY, 1.0, 50.0)]

    def test_quarter_sell(self):
        trades, cash = settle(idc_signals(0, new_dis=1.0), [200.0])
        assert cash == 50.0
        assert trades[0].volume == 0.25

    def test_close_and_reopen_nets_out(self):
        trades, cash = settle(idc_signals(3, close_charge=4.0, new_dis=4.0), np.full(8, 80.0), booked_at=3)
        assert len(trades) == 2
        assert cash == 0.0
        assert [(t.side, t.closing) for t in trades] == [(Side.BUY, True), (Side.SELL, False)]
        assert all(t.delivery_index == 3 and t.booked_at == 3 for t in trades)

    def test_zero_volume_skipped(self):
        trades, cash = settle(idc_signals(0), [80.0])
        assert trades == []
        assert cash == 0.0


class TestBook:
    def test_close_buy_reduces_sell(self):
        book = PositionBook(np.zeros(8), np.zeros(8))
        book.discharge[5] = 1.0
        result = apply_trades_to_book(book, idc_signals(5, close_charge=1.0))
        assert result.discharge[5] == 0.0
        assert book.discharge[5] == 1.0

    def test_close_sell_reduces_buy(self):
        book = PositionBook(np.full(4, 2.0), np.zeros(4))
        result = apply_trades_to_book(book, idc_signals(1, close_dis=0.5, new_charge=0.25))
        assert result.charge.tolist() == [2.0, 1.75, 2.0, 2.0]

    def test_daa_spread(self):
        signals = Signals(DAA, 0, np.array([0.0, 3.0]), np.array([2.0, 0.0]))
        result = apply_trades_to_book(PositionBook.empty(8), signals)
        assert result.charge.tolist() == [0.0] * 4 + [3.0] * 4
        assert result.discharge.tolist() == [2.0] * 4 + [0.0] * 4

    def test_over_close(self):
        book = PositionBook(np.zeros(8), np.zeros(8))
        book.discharge[5] = 1.0
        with pytest.raises(BookkeepingError, match="quarter 5"):
            apply_trades_to_book(book, idc_signals(5, close_charge=1.5))

    def test_out_of_range(self):
        with pytest.raises(BookkeepingError):
            apply_trades_to_book(PositionBook.empty(4), idc_signals(4, new_charge=1.0))


def test_physical_soc():
    params = BatteryParams(p_max=1, e_max=10, eta_ch=1.0, gamma_month=0.0)
    book = PositionBook(np.ones(8), np.zeros(8))
    assert physical_soc_at(book, params, 0) == 0.0
    assert physical_soc_at(book, params, 4) == pytest.approx(1.0)
    lossy = BatteryParams(p_max=1, e_max=10, eta_ch=0.95, gamma_month=0.0)
    assert physical_soc_at(book, lossy, 4) == pytest.approx(0.95)


def test_config_validation():
    timeline = Timeline("2023-03-01", 1)
    with pytest.raises(ConfigurationError):
        BacktestConfig(BatteryParams(), timeline, n_p=0)
    with pytest.raises(ConfigurationError):
        BacktestConfig(BatteryParams(), timeline, sigma=-0.1)
    with pytest.raises(ConfigurationError):
        BacktestConfig(BatteryParams(), timeline, forecast_daa=ForecastMode.NOISY_ID1)


def test_trade_cash():
    assert Trade(IDA, 0, Side.SELL, 0.25, 100.0).cash == 25.0
    assert Trade(IDA, 0, Side.BUY, 0.25, -100.0).cash == 25.0


def test_net_trades():
    portfolio = Portfolio(BatteryParams(), Timeline("2023-03-01", 1))
    portfolio.record([Trade(DAA, 0, Side.BUY, 2.0, 10.0)], DAA)
    portfolio.record([Trade(IDC, 1, Side.SELL, 0.25, 10.0), Trade(IDC, 1, Side.BUY, 0.5, 10.0)], IDC)
    assert portfolio.net_trades(DAA).tolist() == [2.0] * 4
    assert portfolio.net_trades(IDC).tolist() == [0.0, 1.0, 0.0, 0.0]
    assert portfolio.cash_by_segment[IDC] == pytest.approx(-2.5)
    assert portfolio.revenue_total == pytest.approx(-22.5)


class TestBacktest:
    def test_flat_prices(self):
        data = flat_market(6, 50.0)
        portfolio = run_backtest(small_config(data), data)
        assert portfolio.trades == []
        assert portfolio.revenue_total == 0.0
        assert len(portfolio.events) == 2 + 24
        assert portfolio.soc_trajectory.values.tolist() == [0.0] * 25

    def test_matches_oracle(self):
        params = oracle_params()
        prices = valley_peak(6)
        data = make_market(prices)
        portfolio = run_backtest(small_config(data, params, n_p=24), data)
        assert portfolio.revenue_total == pytest.approx(-daa_dp_oracle(prices, params), abs=1e-6)
        assert portfolio.cash_by_segment[DAA] == pytest.approx(130.0, abs=1e-6)

    def test_stage_monotonicity(self):
        for seed in range(50):
            data = synthetic_market_data(days=1, seed=seed, forecast_sigma=None)
            data = make_market(data.daa_actual[:12], data.ida_actual[:48], data.id1_actual[:48])
            portfolio = run_backtest(small_config(data, check_solutions=True), data)
            cash = portfolio.cash_by_segment
            assert cash[IDA] >= -1e-6, seed
            assert cash[IDC] >= -1e-6, seed
            assert portfolio.revenue_total >= cash[DAA] - 1e-6
            assert audit_portfolio(portfolio) == []

    def test_idc_events_never_lose_under_perfect_forecasts(self):
        for seed in (1, 4, 9):
            data = synthetic_market_data(days=1, seed=seed, forecast_sigma=None)
            data = make_market(data.daa_actual[:12], data.ida_actual[:48], data.id1_actual[:48])
            portfolio = run_backtest(small_config(data, check_solutions=True), data)
            events = [i for i in portfolio.events if i.kind is EventKind.IDC_QUARTER]
            assert len(events) == 48
            for event in events:
                assert event.forecast_revenue >= -1e-6, (seed, event.label)
                assert event.cash == pytest.approx(event.forecast_revenue, abs=1e-6)
            assert audit_portfolio(portfolio) == []

    def test_churn_is_cash_neutral(self):
        data = synthetic_market_data(days=1, seed=3, forecast_sigma=None)
        data = make_market(data.daa_actual[:8], data.ida_actual[:32], data.id1_actual[:32])
        config = small_config(data, forecast_idc=ForecastMode.NOISY_ID1, sigma=0.5, seed=1)
        portfolio = run_backtest(config, data)
        net_volume = portfolio.net_trades(IDC) * 0.25
        cash = quarter_cash(portfolio, IDC)
        assert cash == pytest.approx(-data.id1_actual * net_volume, abs=1e-9)
        assert portfolio.trades_of(IDC)
        assert audit_portfolio(portfolio) == []

    def test_audit_tolerance(self):
        data = synthetic_market_data(days=1, seed=3, forecast_sigma=None)
        data = make_market(data.daa_actual[:8], data.ida_actual[:32], data.id1_actual[:32])
        portfolio = run_backtest(small_config(data), data)
        portfolio.cash_by_segment[DAA] += 1e-3
        assert len(audit_portfolio(portfolio)) == 1
        assert audit_portfolio(portfolio, tol=1e-2) == []

    def test_positions_freeze(self):
        data = synthetic_market_data(days=1, seed=5, forecast_sigma=None)
        data = make_market(data.daa_actual[:4], data.ida_actual[:16], data.id1_actual[:16])
        backtest = Backtest(small_config(data, forecast_idc=ForecastMode.NOISY_ID1, sigma=0.3), data)
        for event in backtest.pending:
            before = backtest.book.copy()
            backtest.execute(event)
            if event.kind is EventKind.IDC_QUARTER:
                q = event.fire_index
                assert backtest.book.charge[:q].tolist() == before.charge[:q].tolist()
                assert backtest.book.discharge[:q].tolist() == before.discharge[:q].tolist()
                assert all(t.delivery_index >= q for t in backtest.portfolio.trades if t.booked_at == q and t.segment is IDC)

    def test_soc_is_authoritative(self):
        data = synthetic_market_data(days=1, seed=8, forecast_sigma=None)
        portfolio = run_backtest(small_config(data, n_p=16), data)
        book, params = portfolio.position_book, portfolio.battery
        for q in (0, 17, 60, 96):
            assert portfolio.soc_trajectory[q] == pytest.approx(physical_soc_at(book, params, q))
        assert portfolio.soc_trajectory.violations(params) == []

    def test_event_ledger(self):
        data = synthetic_market_data(days=1, seed=2)
        data = make_market(
            data.daa_actual[:4],
            data.ida_actual[:16],
            data.id1_actual[:16],
            forecasts={DAA: data.forecasts[DAA][:4], IDA: data.forecasts[IDA][:16]},
        )
        config = small_config(data, forecast_daa=ForecastMode.FROM_FILE, forecast_ida=ForecastMode.FROM_FILE)
        portfolio = run_backtest(config, data)
        labels = [e.label for e in portfolio.events]
        assert labels[:3] == ["daa", "ida", "idc:0"]
        assert portfolio.events[0].forecast_mae > 0
        assert portfolio.events[0].forecast_rmse >= portfolio.events[0].forecast_mae
        assert all(e.forecast_mae == 0 for e in portfolio.events[2:])
        for segment, kind in ((DAA, EventKind.DAA_AUCTION), (IDA, EventKind.IDA_AUCTION)):
            ledger = sum(e.cash for e in portfolio.events if e.kind is kind)
            assert ledger == pytest.approx(portfolio.cash_by_segment[segment])

    def test_missing_file_forecast(self):
        data = flat_market(2, 50.0)
        with pytest.raises(DataError):
            run_backtest(small_config(data, forecast_daa=ForecastMode.FROM_FILE), data)

    def test_timeline_mismatch(self):
        data = flat_market(2, 50.0)
        config = BacktestConfig(BatteryParams(), Timeline("2023-03-01", 3))
        with pytest.raises(DataError):
            Backtest(config, data)

    def test_deterministic(self):
        data = synthetic_market_data(days=1, seed=11, forecast_sigma=None)
        data = make_market(data.daa_actual[:6], data.ida_actual[:24], data.id1_actual[:24])
        config = small_config(data, forecast_idc=ForecastMode.NOISY_ID1, sigma=0.2, seed=4)
        first, second = run_backtest(config, data), run_backtest(config, data)
        assert first.trades == second.trades
        assert first.revenue_total == second.revenue_total

    def test_bnb_backend(self):
        data = make_market(valley_peak(4))
        params = oracle_params()
        highs = run_backtest(small_config(data, params, n_p=4), data)
        bnb = run_backtest(small_config(data, params, n_p=4, backend="bnb"), data)
        assert bnb.revenue_total == pytest.approx(highs.revenue_total, abs=1e-6)


@pytest.mark.slow
def test_stage_monotonicity_full_days():
    for seed in range(50):
        data = synthetic_market_data(days=1, seed=seed, forecast_sigma=None)
        portfolio = run_backtest(BacktestConfig(BatteryParams(), data.timeline), data)
        cash = portfolio.cash_by_segment
        assert cash[IDA] >= -1e-6
        assert cash[IDC] >= -1e-6
        assert audit_portfolio(portfolio) == []


@pytest.mark.slow
def test_noise_sensitivity_trend():
    data = synthetic_market_data(days=30, seed=0, forecast_sigma=None)
    base = build_config({"n_p": "16"})
    seeds = range(20)
    labels = ["PF"]
    jobs = [(base, data)]
    for sigma in NOISE_SWEEP:
        for seed in seeds:
            labels.append(f"ID1 sigma={sigma:g}")
            jobs.append((base.updated(forecast_idc="noisy", sigma=sigma, seed=seed), data))
    with ProcessPoolExecutor() as pool:
        portfolios = list(pool.map(run_scenario, jobs))

    report = sensitivity_report(list(zip(labels, portfolios)))
    assert report.frame["runs"].tolist() == [1] + [len(seeds)] * len(NOISE_SWEEP)
    totals = report.frame["total_eur"].tolist()
    assert totals[0] > 0
    for higher, lower in zip(totals, totals[1:]):
        assert lower <= higher + 1e-6, totals
    assert totals[-1] <= 0.7 * totals[0], totals


@pytest.mark.slow
def test_month_throughput():
    data = synthetic_market_data(days=30, seed=3, forecast_sigma=None)
    started = time.perf_counter()
    portfolio = run_backtest(BacktestConfig(BatteryParams(), data.timeline), data)
    elapsed = time.perf_counter() - started
    assert len(portfolio.events) == 2 + data.timeline.Q
    assert elapsed <= 600.0, f"{elapsed:.0f} s"
