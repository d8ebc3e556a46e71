"""Discrete-event CSMA/CA cell: clock, MAC state and the event loop."""

from .clock import SchedulingError, SimClock, schedule
from .engine import CellSimulator, StationWindow, WindowStats
from .mac import (
    CW_LEVELS,
    CW_MAX,
    CW_MIN,
    COLLISION,
    ERROR,
    NO_ERRORS,
    SUCCESS,
    Channel,
    ConfigurationError,
    ErrorCurve,
    Frame,
    MacTiming,
    Station,
    TrafficSource,
    TxOutcome,
    begin_backoff,
    beb_next_cw,
    exchange_timing,
    generate_arrivals,
    p_err,
    resolve_transmission,
    union_length,
)

__all__ = [
    "SchedulingError",
    "SimClock",
    "schedule",
    "CellSimulator",
    "StationWindow",
    "WindowStats",
    "CW_LEVELS",
    "CW_MAX",
    "CW_MIN",
    "COLLISION",
    "ERROR",
    "NO_ERRORS",
    "SUCCESS",
    "Channel",
    "ConfigurationError",
    "ErrorCurve",
    "Frame",
    "MacTiming",
    "Station",
    "TrafficSource",
    "TxOutcome",
    "begin_backoff",
    "beb_next_cw",
    "exchange_timing",
    "generate_arrivals",
    "p_err",
    "resolve_transmission",
    "union_length",
]
