from dataclasses import dataclass

import numpy as np

from cascadebess.constants import FEASIBILITY_TOL, HOURS_PER_DAY, HOURS_PER_MONTH
from cascadebess.errors import ConfigurationError


def gamma_per_step(gamma_month: float, dt: float = 1.0) -> float:
    """
    Convert a monthly self-discharge rate into the hourly rate used by the SOC dynamics.

    The returned rate satisfies (1 - gamma)^730 == 1 - gamma_month. The dynamics then apply
    (1 - gamma)^dt per step, so `dt` is only validated here.

    Args:
        gamma_month (float): Fraction of the stored energy lost per month.
        dt (float, optional): Step length in hours.

    Raises:
        ConfigurationError: If `gamma_month` is outside [0, 1) or `dt` is not positive.

    Example:
        ```python
        >>> gamma_per_step(0.0)
        0.0
        >>> round((1 - gamma_per_step(0.03)) ** 730, 12)
        0.97
        ```
    """
    if not 0.0 <= gamma_month < 1.0:
        raise ConfigurationError(f"monthly self-discharge must be in [0, 1), got {gamma_month}")
    if dt <= 0:
        raise ConfigurationError(f"time step must be positive, got {dt}")
    if gamma_month == 0.0:
        return 0.0
    return float(-np.expm1(np.log1p(-gamma_month) / HOURS_PER_MONTH))


@dataclass(frozen=True)
class BatteryParams:
    """
    Physical and contractual limits of the battery.

    Args:
        p_max (float): Maximum charge/discharge power (MW).
        e_max (float): Energy capacity (MWh).
        eta_ch (float): Charging efficiency.
        eta_dis (float): Discharging efficiency.
        gamma_month (float): Monthly self-discharge rate.
        n_cyc (float): Allowed full equivalent cycles per day.
        e_init (float): Initial state of charge (MWh).
    """

    p_max: float = 10.0
    e_max: float = 10.0
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    gamma_month: float = 0.03
    n_cyc: float = 2.0
    e_init: float = 0.0

    def __post_init__(self) -> None:
        if self.p_max <= 0:
            raise ConfigurationError(f"p_max must be positive, got {self.p_max}")
        if self.e_max <= 0:
            raise ConfigurationError(f"e_max must be positive, got {self.e_max}")
        for name in ("eta_ch", "eta_dis"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(f"{name} must be in (0, 1], got {value}")
        if not 0.0 <= self.e_init <= self.e_max:
            raise ConfigurationError(f"e_init must be in [0, {self.e_max}], got {self.e_init}")
        if self.n_cyc <= 0:
            raise ConfigurationError(f"n_cyc must be positive, got {self.n_cyc}")
        gamma_per_step(self.gamma_month)

    @property
    def gamma(self) -> float:
        """Hourly self-discharge rate."""
        return gamma_per_step(self.gamma_month)

    def retention(self, dt: float) -> float:
        """Fraction of the stored energy kept over a step of `dt` hours."""
        return (1.0 - self.gamma) ** dt

    def cycle_budget(self, hours: float) -> float:
        """Charge (or discharge) volume allowed over `hours` hours (MWh)."""
        return self.e_max * self.n_cyc * hours / HOURS_PER_DAY

    @property
    def dict(self) -> dict[str, float]:
        return {
            "p_max": self.p_max,
            "e_max": self.e_max,
            "eta_ch": self.eta_ch,
            "eta_dis": self.eta_dis,
            "gamma_month": self.gamma_month,
            "n_cyc": self.n_cyc,
            "e_init": self.e_init,
        }


def step_soc(e: float, p_ch: float, p_dis: float, dt: float, params: BatteryParams) -> float:
    """
    Advance the state of charge by one step.

    Returns e * (1 - gamma)^dt + p_ch * eta_ch * dt - p_dis * dt / eta_dis. The result is not
    clamped to the capacity; feasibility is the optimiser's job.

    Example:
        ```python
        >>> params = BatteryParams(p_max=10, e_max=10, gamma_month=0.0)
        >>> step_soc(5.0, 2.0, 0.0, 1.0, params)
        6.9
        ```
    """
    return e * params.retention(dt) + p_ch * params.eta_ch * dt - p_dis * dt / params.eta_dis


class SocTrajectory:
    """
    State of charge at the boundaries of consecutive periods, E[0..T].

    Attributes:
        values (np.ndarray): SOC in MWh, one entry more than there are periods.
        dt (float): Period length in hours.
    """

    def __init__(self, values, dt: float) -> None:
        self.values = np.asarray(values, dtype=float)
        self.dt = dt

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(periods={len(self)}, start={self.values[0]:.4f}, end={self.values[-1]:.4f})"

    def __len__(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, index):
        return self.values[index]

    def violations(self, params: BatteryParams, tol: float = FEASIBILITY_TOL) -> list[int]:
        """Indices where the SOC leaves [0, e_max] by more than `tol`."""
        bad = (self.values < -tol) | (self.values > params.e_max + tol)
        return [int(i) for i in np.flatnonzero(bad)]

    @classmethod
    def simulate(cls, params: BatteryParams, p_ch, p_dis, dt: float, e0: float | None = None):
        """
        Fold `step_soc` over a charge/discharge schedule.

        Args:
            params (BatteryParams): Battery parameters.
            p_ch (array-like): Charge power per period (MW).
            p_dis (array-like): Discharge power per period (MW).
            dt (float): Period length in hours.
            e0 (float, optional): Starting SOC. Defaults to `params.e_init`.
        """
        p_ch = np.asarray(p_ch, dtype=float)
        p_dis = np.asarray(p_dis, dtype=float)
        values = np.empty(len(p_ch) + 1)
        values[0] = params.e_init if e0 is None else e0
        for t in range(len(p_ch)):
            values[t + 1] = step_soc(values[t], p_ch[t], p_dis[t], dt, params)
        return cls(values, dt)


def full_equivalent_cycles(charge_energy_stored: float, params: BatteryParams) -> float:
    """
    Number of full equivalent cycles a stored charge volume corresponds to.

    Example:
        ```python
        >>> full_equivalent_cycles(10.0, BatteryParams(e_max=10))
        1.0
        ```
    """
    return charge_energy_stored / params.e_max


__all__ = [
    "BatteryParams",
    "SocTrajectory",
    "gamma_per_step",
    "step_soc",
    "full_equivalent_cycles",
]
