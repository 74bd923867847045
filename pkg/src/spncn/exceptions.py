class ShapeError(ValueError):
    """Array dimensions do not match what an operation requires."""


class NumericInputError(ValueError):
    """A non-finite value reached the simulation."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class DatasetError(ValueError):
    """Base class for dataset ingestion failures."""


class BadMagicError(DatasetError):
    pass


class TruncatedFileError(DatasetError):
    pass


class CountMismatchError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


class ParseError(DatasetError):
    pass


class ConfigError(ValueError):
    pass
