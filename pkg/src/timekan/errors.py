class TimeKanError(Exception):
    pass


class ConfigError(TimeKanError, ValueError):
    """Invalid hyperparameters, unknown config keys, or config/checkpoint mismatch."""


class ShapeError(TimeKanError, ValueError):
    pass


class DataError(TimeKanError, ValueError):
    """Malformed CSV input or a dataset too short for the requested windows."""


class NumericalError(TimeKanError, ArithmeticError):
    """A non-finite value appeared; the message names the stage or coordinate."""
