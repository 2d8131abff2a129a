from dataclasses import dataclass, field
from enum import Enum

import pandas as pd

from cascadebess.constants import DT_DAA, DT_ID, HOURS_PER_DAY, QUARTERS_PER_HOUR
from cascadebess.errors import ConfigurationError


class MarketSegment(str, Enum):
    """A market segment of the spot exchange the battery trades on."""

    DAA = "DAA"
    IDA = "IDA"
    IDC = "IDC"

    @property
    def dt(self) -> float:
        """Length of one delivery period in hours."""
        return DT_DAA if self is MarketSegment.DAA else DT_ID

    @property
    def freq(self) -> pd.Timedelta:
        return pd.Timedelta(hours=self.dt)


class EventKind(str, Enum):
    DAA_AUCTION = "daa"
    IDA_AUCTION = "ida"
    IDC_QUARTER = "idc"

    @property
    def segment(self) -> MarketSegment:
        return {
            EventKind.DAA_AUCTION: MarketSegment.DAA,
            EventKind.IDA_AUCTION: MarketSegment.IDA,
            EventKind.IDC_QUARTER: MarketSegment.IDC,
        }[self]


@dataclass(frozen=True)
class Timeline:
    """
    The delivery grid of a backtest window.

    Args:
        start (pd.Timestamp): Start of the first delivery hour.
        H (int): Number of hours in the test period.

    Attributes:
        Q (int): Number of quarter-hours in the test period (always 4 * H).
        dt_daa (float): DAA resolution in hours.
        dt_id (float): IDA/IDC resolution in hours.
    """

    start: pd.Timestamp
    H: int
    dt_daa: float = field(default=DT_DAA, init=False)
    dt_id: float = field(default=DT_ID, init=False)

    def __post_init__(self) -> None:
        if self.H <= 0:
            raise ConfigurationError(f"timeline needs at least one hour, got H={self.H}")
        object.__setattr__(self, "start", pd.Timestamp(self.start))

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(start='{self.start.isoformat()}', H={self.H}, Q={self.Q})"

    @property
    def Q(self) -> int:
        return QUARTERS_PER_HOUR * self.H

    @property
    def days(self) -> float:
        return self.H / HOURS_PER_DAY

    @property
    def end(self) -> pd.Timestamp:
        return self.start + pd.Timedelta(hours=self.H)

    def periods(self, segment: MarketSegment) -> int:
        """Number of delivery periods of `segment` in the window."""
        return self.H if segment is MarketSegment.DAA else self.Q

    def timestamps(self, segment: MarketSegment) -> pd.DatetimeIndex:
        """Delivery start times of every period of `segment`."""
        return pd.date_range(self.start, periods=self.periods(segment), freq=segment.freq)

    def hour_of_quarter(self, q: int) -> int:
        return hour_of_quarter(q, self.Q)

    @classmethod
    def from_days(cls, start: str | pd.Timestamp, days: int) -> "Timeline":
        return cls(start=pd.Timestamp(start), H=HOURS_PER_DAY * days)


@dataclass(frozen=True)
class TradingEvent:
    """
    One optimisation of the backtest calendar.

    Attributes:
        kind (EventKind): Which strategy fires.
        fire_index (int): Quarter index at which the event executes.
        window (range): Delivery-period indices the event may trade (hours for the DAA,
            quarters otherwise).
    """

    kind: EventKind
    fire_index: int
    window: range

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(kind='{self.kind.value}', fire_index={self.fire_index}, window={self.window.start}..{self.window.stop - 1})"

    @property
    def segment(self) -> MarketSegment:
        return self.kind.segment

    @property
    def label(self) -> str:
        """Identifier used in logs and by `dump-lp` (`daa`, `ida`, `idc:<q>`)."""
        if self.kind is EventKind.IDC_QUARTER:
            return f"idc:{self.fire_index}"
        return self.kind.value


def hour_of_quarter(q: int, Q: int) -> int:
    """
    Map a quarter-hour index to the index of the hour that contains it.

    Args:
        q (int): Quarter index.
        Q (int): Number of quarters in the test period.

    Raises:
        IndexError: If `q` is negative or not below `Q`.

    Example:
        ```python
        >>> hour_of_quarter(7, 96)
        1
        >>> hour_of_quarter(95, 96)
        23
        ```
    """
    if not 0 <= q < Q:
        raise IndexError(f"quarter index {q} out of range for Q={Q}")
    return q // QUARTERS_PER_HOUR


def build_event_calendar(timeline: Timeline, n_p: int) -> list[TradingEvent]:
    """
    Build the ordered list of trading events of a backtest.

    The DAA fires once over all hours, then the IDA once over all quarters, then one IDC
    event per quarter whose window starts at its own quarter and is truncated at the end
    of the test period.

    Args:
        timeline (Timeline): The test window.
        n_p (int): IDC prediction horizon in quarters.

    Raises:
        ConfigurationError: If `n_p` is smaller than one.
    """
    if n_p < 1:
        raise ConfigurationError(f"prediction horizon must be at least one quarter, got {n_p}")
    if timeline.H <= 0:
        raise ConfigurationError("timeline has no hours")

    Q = timeline.Q
    events = [
        TradingEvent(EventKind.DAA_AUCTION, 0, range(timeline.H)),
        TradingEvent(EventKind.IDA_AUCTION, 0, range(Q)),
    ]
    for q_i in range(Q):
        events.append(TradingEvent(EventKind.IDC_QUARTER, q_i, range(q_i, q_i + min(n_p, Q - q_i))))
    return events


def find_event(events: list[TradingEvent], label: str) -> TradingEvent:
    """
    Look up an event by its label (`daa`, `ida` or `idc:<quarter>`).

    Raises:
        KeyError: If no event carries the label.
    """
    for event in events:
        if event.label == label:
            return event
    raise KeyError(label)


__all__ = [
    "MarketSegment",
    "EventKind",
    "Timeline",
    "TradingEvent",
    "hour_of_quarter",
    "build_event_calendar",
    "find_event",
]
