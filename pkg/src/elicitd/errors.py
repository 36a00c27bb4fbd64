"""Exception hierarchy shared by all elicitd modules."""


class ElicitError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ElicitError):
    """Tensor or layer shapes are incompatible."""


class NumericsError(ElicitError):
    """A computation produced a non-finite value."""


class DomainError(ElicitError):
    """A parameter is outside its mathematical domain."""


class DataError(ElicitError):
    """A data record or file is malformed or out of range."""


class SchemaError(ElicitError):
    """A required column or config field is missing or mistyped."""


class SplitError(ElicitError):
    """A train/test split would leave a class empty on one side."""


class SupportError(ElicitError):
    """KL divergence is undefined: Q puts mass where P has none."""
