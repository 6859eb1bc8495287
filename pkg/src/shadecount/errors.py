"""Exception types shared across the pipeline."""


class ShadecountError(Exception):
    """Base class for all package-specific failures."""


class MissingColumn(ShadecountError):
    """Input CSV header lacks a required column."""


class EmptyFile(ShadecountError):
    """Input CSV has no data rows."""


class TooManyRejects(ShadecountError):
    """Row-level reject fraction exceeded the configured abort threshold."""


class TooFewDays(ShadecountError):
    """Fewer usable dates than requested folds."""


class DomainError(ShadecountError):
    """Argument outside its physical domain (e.g. relative humidity)."""


class EmptyNight(ShadecountError):
    """A day has no observations in its preceding night window."""


class EmptyTrainingSet(ShadecountError):
    """Model fitting was called with zero examples."""


class ArityMismatch(ShadecountError):
    """Feature row length differs from what the model was trained on."""


class LengthMismatch(ShadecountError):
    """Paired sequences have different lengths."""


class EmptyInput(ShadecountError):
    """An aggregate was requested over an empty collection."""


class FoldLeak(ShadecountError):
    """A test date leaked into the training set of the same fold."""


class NonFiniteLoss(ShadecountError):
    """Training diverged: loss went non-finite or blew up over its minimum."""


class UnknownDate(ShadecountError):
    """Requested date is not present in the feature table."""
