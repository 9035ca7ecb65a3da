"""Exception types shared across the package."""


class IndzslError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(IndzslError):
    """Operand dimensions are inconsistent."""


class NumericError(IndzslError):
    """A computation produced or received non-finite values."""


class ValidationError(IndzslError):
    """An input violates a documented invariant."""


class DegenerateSpanError(ValidationError):
    """Semantic matrix has rank < 2, so no component can be removed."""


class ZeroVectorError(ValidationError):
    """Cosine similarity is undefined for a zero vector."""


class ParameterError(IndzslError):
    """A parameter value is outside its admissible range."""


class DataError(IndzslError):
    """A sample pool or label set is unusable (empty class, bad label)."""


class LoadError(IndzslError):
    """A file failed to parse or validate."""


class TrainingError(IndzslError):
    """Training diverged or was misconfigured."""


class EvaluationError(IndzslError):
    """Evaluation inputs are inconsistent with the classifier."""


class ConfigError(IndzslError):
    """Run configuration is invalid or internally inconsistent."""
