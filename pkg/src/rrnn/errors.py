"""Exception types shared across the package."""


class RrnnError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(RrnnError):
    """Operand dimensions do not agree."""


class DataError(RrnnError):
    """A dataset, file, or sample is malformed or inconsistent."""


class MissingFieldError(RrnnError):
    """A sample lacks a field the requested loss needs."""


class NoHeadError(RrnnError):
    """A classifier operation was requested on a model without a head."""


class NumericError(RrnnError):
    """A non-finite value appeared where the computation requires finite ones."""
