class CascadeError(Exception):
    """Base class for all errors raised by cascadebess."""


class ConfigurationError(CascadeError, ValueError):
    """Invalid battery parameters, timeline or run configuration."""


class ValidationError(CascadeError, ValueError):
    """Malformed optimisation problem or mismatched inputs."""


class DataError(CascadeError):
    """Market data that cannot be ingested (gaps, duplicates, bounds, alignment)."""


class SolverError(CascadeError):
    """The solver broke down or returned a status it should not have."""


class InfeasibleEventError(SolverError):
    """A strategy problem for a trading event has no feasible solution."""

    def __init__(self, event: str, message: str = "") -> None:
        self.event = event
        text = f"strategy problem for event {event} is infeasible"
        if message:
            text += f": {message}"
        super().__init__(text)


class SignalExtractionError(CascadeError):
    """Trading signals were requested from a solution that is not optimal."""


class BookkeepingError(CascadeError):
    """A closing trade exceeds the position it is supposed to close."""


__all__ = [
    "CascadeError",
    "ConfigurationError",
    "ValidationError",
    "DataError",
    "SolverError",
    "InfeasibleEventError",
    "SignalExtractionError",
    "BookkeepingError",
]
