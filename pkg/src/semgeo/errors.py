"""Exception hierarchy. The CLI maps each family to its own exit code."""


class SemgeoError(Exception):
    """Base class for all package errors."""


class InputError(SemgeoError, ValueError):
    """Malformed, empty or inconsistent input data."""


class ConfigError(SemgeoError, ValueError):
    """Invalid parameter values or configuration."""


class ServiceError(SemgeoError):
    """Failure talking to an external service (reverse geocoder)."""


class UnknownLocationError(InputError, KeyError):
    """A location id is not part of the hierarchy."""

    def __str__(self):
        return Exception.__str__(self)


class UnassignableError(SemgeoError):
    """No location of an address vector is a cell of the partitioning.

    Deliberately not an InputError: the address is well formed, it just
    falls outside the partitioning.
    """
