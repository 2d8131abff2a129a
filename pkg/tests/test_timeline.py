import pandas as pd
import pytest

from cascadebess.errors import ConfigurationError
from cascadebess.timeline import (
    EventKind,
    MarketSegment,
    Timeline,
    build_event_calendar,
    find_event,
    hour_of_quarter,
)


def test_timeline_sizes():
    timeline = Timeline.from_days("2023-03-01", 2)
    assert timeline.H == 48
    assert timeline.Q == 192
    assert timeline.days == 2
    assert timeline.end == pd.Timestamp("2023-03-03")
    assert timeline.periods(MarketSegment.DAA) == 48
    assert timeline.periods(MarketSegment.IDA) == 192


def test_timeline_rejects_empty():
    with pytest.raises(ConfigurationError):
        Timeline("2023-03-01", 0)


def test_timestamps():
    timeline = Timeline("2023-03-01", 2)
    stamps = timeline.timestamps(MarketSegment.IDC)
    assert len(stamps) == 8
    assert stamps[1] == pd.Timestamp("2023-03-01 00:15")
    assert timeline.timestamps(MarketSegment.DAA)[1] == pd.Timestamp("2023-03-01 01:00")


def test_segment_resolution():
    assert MarketSegment.DAA.dt == 1.0
    assert MarketSegment.IDA.dt == 0.25
    assert MarketSegment.IDC.freq == pd.Timedelta(minutes=15)


def test_hour_of_quarter():
    assert hour_of_quarter(0, 96) == 0
    assert hour_of_quarter(3, 96) == 0
    assert hour_of_quarter(4, 96) == 1
    assert hour_of_quarter(95, 96) == 23
    assert Timeline("2023-03-01", 24).hour_of_quarter(50) == 12
    with pytest.raises(IndexError):
        hour_of_quarter(96, 96)
    with pytest.raises(IndexError):
        hour_of_quarter(-1, 96)
    with pytest.raises(IndexError):
        Timeline("2023-03-01", 1).hour_of_quarter(4)
    with pytest.raises(TypeError):
        hour_of_quarter(7)


def test_calendar_order():
    events = build_event_calendar(Timeline("2023-03-01", 24), 96)
    assert len(events) == 2 + 96
    assert events[0].kind is EventKind.DAA_AUCTION
    assert events[0].window == range(24)
    assert events[1].kind is EventKind.IDA_AUCTION
    assert events[1].window == range(96)
    assert [e.fire_index for e in events[2:]] == list(range(96))


def test_calendar_windows_truncate():
    events = build_event_calendar(Timeline("2023-03-01", 24), 96)
    idc = events[2:]
    assert idc[0].window == range(0, 96)
    assert idc[10].window == range(10, 96)
    assert len(idc[-1].window) == 1


def test_calendar_short_horizon():
    events = build_event_calendar(Timeline("2023-03-01", 2), 3)
    windows = [len(e.window) for e in events[2:]]
    assert windows == [3, 3, 3, 3, 3, 3, 2, 1]


def test_calendar_rejects_horizon():
    with pytest.raises(ConfigurationError):
        build_event_calendar(Timeline("2023-03-01", 1), 0)


def test_event_labels():
    events = build_event_calendar(Timeline("2023-03-01", 1), 4)
    assert [e.label for e in events] == ["daa", "ida", "idc:0", "idc:1", "idc:2", "idc:3"]
    assert find_event(events, "idc:2").fire_index == 2
    assert find_event(events, "ida").segment is MarketSegment.IDA
    with pytest.raises(KeyError):
        find_event(events, "idc:4")


def test_constants_exports():
    from cascadebess import constants

    public = {k for k in vars(constants) if k.isupper()}
    assert set(constants.__all__) == public
    assert constants.DT_ID * constants.QUARTERS_PER_HOUR == constants.DT_DAA
