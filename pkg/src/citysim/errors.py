"""Shared exception types."""


class CitySimError(Exception):
    """Base class for all package errors."""


class CityValidationError(CitySimError):
    """A city file or in-memory city violated a structural invariant."""


class InvalidIntentionError(CitySimError):
    """A place-selection request carried no usable POI categories."""


class PersonaValidationError(CitySimError):
    """A persona record violated a field invariant."""


class PopulationError(CitySimError):
    """The city cannot support the requested synthetic population."""


class TimeRegressionError(CitySimError):
    """An append would move a chronological stream backwards."""


class ScheduleError(CitySimError):
    """A schedule operation would break the day partition."""


class ConfigError(CitySimError):
    """A simulation configuration is invalid or unreadable."""


class SnapshotError(CitySimError):
    """A snapshot file is unreadable or from an incompatible version."""
