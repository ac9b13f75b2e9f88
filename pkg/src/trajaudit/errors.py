"""Exception taxonomy shared across the toolkit."""


class TrajauditError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(TrajauditError):
    """Non-finite or otherwise malformed numeric input."""


class DegenerateWindowError(TrajauditError):
    """An averaging window carries no usable weight."""


class DegenerateMeanError(TrajauditError):
    """Circular mean of perfectly opposed angles (zero resultant vector)."""


class SchemaError(TrajauditError):
    """A record or file violates its declared schema or format version."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidSpecError(TrajauditError):
    """A scenario specification is unusable (non-positive duration, bad path, ...)."""


class InsufficientOverlapError(TrajauditError):
    """A track pair overlaps in fewer than two frames."""


class UndefinedDirectionError(TrajauditError):
    """Longitudinal projection requested while the heavy participant is not moving."""


class UndefinedMetricError(TrajauditError):
    """A metric has no defined value on the given input (e.g. no moving frames)."""


class ReferentialIntegrityError(TrajauditError):
    """A record references an event or round that does not exist."""


class ReviewValidationError(TrajauditError):
    """A review record violates the decision/tag invariants."""


class StoreError(TrajauditError):
    """QA store cannot satisfy the request (missing track, bad layout, ...)."""


class ReadOnlyStoreError(StoreError):
    """Write attempted on a store opened read-only."""
