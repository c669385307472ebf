"""Shared exception types for file and data validation failures."""


class FormatError(ValueError):
    """A file does not match its declared binary or text layout."""


class DataError(ValueError):
    """A file parses but contains invalid content (bad indices, NaNs, ...)."""


class TrainingError(RuntimeError):
    """Optimization aborted (non-finite loss or gradients)."""
