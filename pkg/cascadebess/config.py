import os
from typing import Literal

import pandas as pd
import pydantic
from pydantic import BaseModel, ConfigDict, Field

from cascadebess.battery import BatteryParams
from cascadebess.engine import BacktestConfig, ForecastMode
from cascadebess.errors import ConfigurationError
from cascadebess.timeline import Timeline


class RunConfig(BaseModel):
    """
    Configuration of a backtest run. Defaults describe a 10 MW / 10 MWh battery with 95 %
    charge and discharge efficiency, 3 % self-discharge per month, two cycles per day,
    a 24 hour IDC horizon and an empty battery at the start.

    Attributes:
        start (str, optional): First delivery hour. Inferred from the data when omitted.
        hours (int, optional): Length of the test window. Inferred from the data when omitted.
        timezone (str, optional): Zone of naive timestamps and of the test window.
        forecast_file (str, optional): Separate CSV with forecast rows.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    # battery
    p_max: float = Field(10.0, gt=0)
    e_max: float = Field(10.0, gt=0)
    eta_ch: float = Field(0.95, gt=0, le=1)
    eta_dis: float = Field(0.95, gt=0, le=1)
    gamma_month: float = Field(0.03, ge=0, lt=1)
    n_cyc: float = Field(2.0, gt=0)
    e_init: float = Field(0.0, ge=0)

    # backtest
    n_p: int = Field(96, ge=1)
    start: str | None = None
    hours: int | None = Field(None, ge=1)
    timezone: str | None = None

    # forecasts
    forecast_daa: Literal["perfect", "file"] = "perfect"
    forecast_ida: Literal["perfect", "file"] = "perfect"
    forecast_idc: Literal["perfect", "file", "noisy"] = "perfect"
    sigma: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)
    forecast_file: str | None = None

    backend: Literal["highs", "bnb"] = "highs"

    @property
    def battery(self) -> BatteryParams:
        return BatteryParams(
            p_max=self.p_max,
            e_max=self.e_max,
            eta_ch=self.eta_ch,
            eta_dis=self.eta_dis,
            gamma_month=self.gamma_month,
            n_cyc=self.n_cyc,
            e_init=self.e_init,
        )

    def timeline(self) -> Timeline | None:
        """The configured test window, or None when it is left to the data."""
        if self.start is None:
            if self.hours is not None:
                raise ConfigurationError("'hours' needs 'start'")
            return None
        if self.hours is None:
            raise ConfigurationError("'start' needs 'hours'")
        try:
            start = pd.Timestamp(self.start)
        except ValueError as e:
            raise ConfigurationError(f"invalid start '{self.start}'") from e
        if self.timezone and start.tzinfo is None:
            start = start.tz_localize(self.timezone)
        return Timeline(start, self.hours)

    def backtest_config(self, timeline: Timeline) -> BacktestConfig:
        return BacktestConfig(
            battery=self.battery,
            timeline=timeline,
            n_p=self.n_p,
            forecast_daa=ForecastMode(self.forecast_daa),
            forecast_ida=ForecastMode(self.forecast_ida),
            forecast_idc=ForecastMode(self.forecast_idc),
            sigma=self.sigma,
            seed=self.seed,
            backend=self.backend,
        )

    def updated(self, **values) -> "RunConfig":
        return build_config({**self.model_dump(), **values})

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "RunConfig":
        """
        Raises:
            ConfigurationError: If the file is missing or does not parse.
        """
        if not os.path.isfile(path):
            raise ConfigurationError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as f:
            return build_config(parse_config_text(f.read()))


def parse_config_text(text: str) -> dict[str, str]:
    """
    Parse flat `key = value` lines. `#` starts a comment, blank lines are skipped.

    Raises:
        ConfigurationError: On a line without `=`, an empty key or a repeated key.

    Example:
        ```python
        >>> parse_config_text("p_max = 5  # MW\\n\\nn_cyc=1")
        {'p_max': '5', 'n_cyc': '1'}
        ```
    """
    values: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {n}: expected 'key = value', got '{raw.strip()}'")
        key, value = (i.strip() for i in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"line {n}: missing key")
        if key in values:
            raise ConfigurationError(f"line {n}: duplicate key '{key}'")
        values[key] = value
    return values


def build_config(values: dict) -> RunConfig:
    """
    Validate raw values into a `RunConfig`.

    Raises:
        ConfigurationError: On unknown keys or invalid values, listing every problem.
    """
    try:
        config = RunConfig(**{k: None if v == "" else v for k, v in values.items()})
    except pydantic.ValidationError as e:
        problems = []
        for error in e.errors():
            key = ".".join(str(i) for i in error["loc"]) or "config"
            if error["type"] == "extra_forbidden":
                problems.append(f"unknown key '{key}'")
            else:
                problems.append(f"{key}: {error['msg']}")
        raise ConfigurationError("; ".join(problems)) from e
    if config.e_init > config.e_max:
        raise ConfigurationError(f"e_init must be in [0, {config.e_max}], got {config.e_init}")
    return config


__all__ = ["RunConfig", "parse_config_text", "build_config"]
