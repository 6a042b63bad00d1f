"""Exception types shared across the package."""


class CoherentIsingError(Exception):
    """Base class for all package errors."""


class InstanceError(CoherentIsingError, ValueError):
    """An Ising instance or spin configuration violates its invariants."""


class InstanceFormatError(InstanceError):
    """An instance file could not be parsed.

    ``location`` names the offending element (e.g. ``couplings[3]``) or the
    JSON line/column when the text itself is malformed.
    """

    def __init__(self, message, location=None, path=None):
        self.message = message
        self.location = location
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if location is not None:
            prefix += f"{location}: "
        super().__init__(prefix + message)


class DimensionError(CoherentIsingError, ValueError):
    """Spin count of a configuration does not match the instance."""


class EnumerationLimitError(CoherentIsingError):
    """Spin count exceeds the enumeration cap."""


class GenerationFailedError(CoherentIsingError):
    """Rejection sampling ran out of draws."""

    def __init__(self, message, attempts):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempts)")


class EmptyLockedSetError(CoherentIsingError):
    """No configuration lies inside the locking window."""
