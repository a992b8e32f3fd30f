# src/exceptions.py
"""Exception hierarchy shared by the library, trainer and command line."""


class AlibiEmbedError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(AlibiEmbedError, ValueError):
    """Operands or layers disagree on tensor extents."""


class NumericError(AlibiEmbedError, ArithmeticError):
    """A non-finite value reached a place that requires finite numbers."""


class VocabularyError(AlibiEmbedError, ValueError):
    pass


class DataError(AlibiEmbedError, ValueError):
    """Input files are missing, malformed, or do not match the expected schema."""


class CheckpointError(DataError):
    pass


class ConfigError(AlibiEmbedError, ValueError):
    pass


class EvaluationError(AlibiEmbedError, ValueError):
    pass


class UsageError(AlibiEmbedError):
    """Bad command-line usage."""
