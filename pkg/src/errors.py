class DebuggerError(Exception):
    """
    Base class of every error raised by the library.
    """


class SchemaError(DebuggerError):
    """
    The schema file cannot be parsed or is inconsistent with itself.
    """


class DatasetError(DebuggerError):
    """
    The data does not match its schema (unknown column, empty file, non binary label, ...).
    """


class PredicateError(DebuggerError):
    """
    A literal or predicate cannot be evaluated against a schema.
    """


class ForestError(DebuggerError):
    """
    Invalid forest parameters or a dataset whose schema does not match the fitted forest.
    """


class UnknownInstanceError(ForestError):
    """
    A deletion request names a training row that is unknown or already deleted.
    """


class UndefinedMetricError(DebuggerError):
    """
    A fairness metric conditions on an empty event.

    Attributes
    ----------
    denominator (str): Name of the conditional whose count vanished, e.g. "predicted positives (S=0)".
    """

    def __init__(self, denominator: str):
        super().__init__(f"undefined metric: zero {denominator}")
        self.denominator = denominator


class UnbiasedModelError(DebuggerError):
    """
    The original model has zero bias, so subset contributions are undefined.
    """

    def __init__(self, message: str = "original model unbiased: nothing to debug"):
        super().__init__(message)


class ConfigError(DebuggerError):
    """
    A run configuration value is out of range or conflicts with another one.
    """
