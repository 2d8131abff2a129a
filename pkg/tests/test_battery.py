import pytest

from cascadebess.battery import (
    BatteryParams,
    SocTrajectory,
    full_equivalent_cycles,
    gamma_per_step,
    step_soc,
)
from cascadebess.errors import ConfigurationError

NO_DECAY = BatteryParams(gamma_month=0.0)


def test_gamma_zero():
    assert gamma_per_step(0.0) == 0.0
    assert NO_DECAY.retention(0.25) == 1.0


def test_gamma_recompounds():
    gamma = gamma_per_step(0.03)
    assert gamma > 0
    assert (1 - gamma) ** 730 == pytest.approx(0.97, abs=1e-12)


def test_gamma_rejects():
    with pytest.raises(ConfigurationError):
        gamma_per_step(1.0)
    with pytest.raises(ConfigurationError):
        gamma_per_step(-0.1)
    with pytest.raises(ConfigurationError):
        gamma_per_step(0.03, dt=0)


def test_case_study_defaults():
    params = BatteryParams()
    assert (params.p_max, params.e_max) == (10.0, 10.0)
    assert params.gamma_month == 0.03
    assert params.cycle_budget(24) == 20.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"p_max": 0},
        {"e_max": -1},
        {"eta_ch": 0},
        {"eta_dis": 1.1},
        {"e_init": 11},
        {"n_cyc": 0},
        {"gamma_month": 1.0},
    ],
)
def test_params_validation(kwargs):
    with pytest.raises(ConfigurationError):
        BatteryParams(**kwargs)


def test_step_soc_charge():
    assert step_soc(5.0, 2.0, 0.0, 1.0, NO_DECAY) == pytest.approx(6.9)


def test_step_soc_discharge():
    params = BatteryParams(p_max=1, e_max=1, gamma_month=0.0)
    assert step_soc(1.0, 0.0, 0.9025, 1.0, params) == pytest.approx(0.05)


def test_step_soc_decays():
    assert step_soc(10.0, 0.0, 0.0, 0.25, BatteryParams()) < 10.0


def test_retention_composes():
    params = BatteryParams(gamma_month=0.2)
    assert params.retention(0.25) ** 4 == pytest.approx(params.retention(1.0))


def test_simulate():
    soc = SocTrajectory.simulate(NO_DECAY, [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, e0=5.0)
    assert len(soc) == 3
    assert soc[0] == 5.0
    assert soc[1] == pytest.approx(6.9)
    assert soc[2] == pytest.approx(6.9 - 1 / 0.95)
    assert soc[3] == soc[2]
    assert soc.violations(NO_DECAY) == []


def test_violations():
    params = BatteryParams(p_max=10, e_max=1, gamma_month=0.0)
    soc = SocTrajectory.simulate(params, [10.0, 0.0], [0.0, 0.0], 0.25)
    assert soc.violations(params) == [1, 2]


def test_cycles():
    assert full_equivalent_cycles(10.0, BatteryParams(e_max=10)) == 1.0
    assert full_equivalent_cycles(0.0, BatteryParams()) == 0.0
