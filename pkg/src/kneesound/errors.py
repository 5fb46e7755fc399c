"""Domain-specific exception types.

Everything raised on purpose by this package derives from KneesoundError so
callers (and the CLI) can separate pipeline failures from genuine bugs.
"""


class KneesoundError(Exception):
    """Base class for all errors raised by kneesound."""


class WavFormatError(KneesoundError):
    """Unreadable or unsupported WAV payload."""


class EmptyInputError(KneesoundError):
    """An operation received no samples, no rows or no recordings."""


class DegenerateSignalError(KneesoundError):
    """Signal has no energy where a scale factor is required."""


class FrameLengthError(KneesoundError):
    """Frame length shorter than 2 samples or longer than the signal."""


class FilterbankResolutionError(KneesoundError):
    """Too many bands for the spectral resolution: some triangle covers no bin."""


class InsufficientFramesError(KneesoundError):
    """Summary statistics need at least two frames per segment."""


class DegenerateTrainingError(KneesoundError):
    """Training data does not contain what the classifier needs (e.g. one class)."""


class GroupingError(KneesoundError):
    """Cross-validation groups cannot be formed from the available knees."""


class EvaluationError(KneesoundError):
    """Metric undefined for the given predictions (e.g. ROC with one class)."""
