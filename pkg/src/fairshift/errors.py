"""Exception types shared across the package."""


class FairshiftError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(FairshiftError, ValueError):
    """Array dimensions do not match what an operation requires."""


class EmptyBatchError(FairshiftError, ValueError):
    """An operation received zero samples."""


class DegenerateGroupError(FairshiftError, ValueError):
    """A sensitive-attribute group view is empty (or lacks required labels)."""


class DegenerateVarianceError(FairshiftError, ValueError):
    """Data has no variance along any direction."""


class NumericError(FairshiftError, ArithmeticError):
    """A computation produced non-finite values."""


class TrainingDiverged(NumericError):
    """Training hit a non-finite loss; carries the epoch where it happened."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training loss became non-finite at epoch {epoch}")


class SchemaError(FairshiftError, ValueError):
    """A dataset schema is inconsistent with the file it describes."""


class EmptyDataError(FairshiftError, ValueError):
    """Loading or filtering produced an empty dataset."""


class PartitionError(FairshiftError, ValueError):
    """A source/target partition left one side empty."""


class SampleSizeError(FairshiftError, ValueError):
    """Requested sample counts exceed the available pool."""


class ValidationError(FairshiftError, ValueError):
    """A value object violates its invariants (masses, norms, marginals)."""


class UsageError(FairshiftError, ValueError):
    """Contradictory or incomplete configuration supplied to the CLI."""
