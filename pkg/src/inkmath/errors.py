"""Exception hierarchy shared across the package."""


class InkError(Exception):
    """Base class for all package-specific errors."""


class InkmlParseError(InkError):
    """Malformed InkML document. Carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class IntegrityError(InkError):
    """Document is well-formed but internally inconsistent (bad references)."""


class StructureError(InkError):
    """A stroke label graph violates its tree invariants."""


class ConversionError(InkError):
    """An SLG cannot be expressed in the target output grammar."""


class LatexParseError(InkError):
    """Input LaTeX is outside the supported grammar."""


class ShapeError(InkError):
    """Tensor shape mismatch inside a network layer."""


class ModelError(InkError):
    """Model file or weight set is unusable."""


class CapacityError(InkError):
    """Input exceeds a configured model capacity (e.g. sequence length)."""


class DataError(InkError):
    """A training dataset is empty or malformed."""


class ComparisonError(InkError):
    """Two graphs cannot be compared (different trace universes)."""


class AnnotationFailure(InkError):
    """Auto-annotation could not align a step to any traces."""


class StageError(InkError):
    """A pipeline stage failed. Carries the stage name and whatever partial
    artifacts existed at the time."""

    def __init__(self, stage: str, cause: Exception, partial: dict | None = None):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial or {}
