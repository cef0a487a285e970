"""Exceptions raised by the analysis toolkit"""


class ToolkitError(Exception):
    """Base class for every data error the toolkit reports (CLI exit code 2)."""


class AudioNotFoundError(ToolkitError, FileNotFoundError):
    """Input audio file does not exist."""


class UnsupportedEncodingError(ToolkitError):
    """Audio file is not PCM/float WAV."""


class RateMismatchError(ToolkitError):
    """Sample rate differs from the analysis rate and resampling is forbidden."""


class SignalTooShortError(ToolkitError):
    """Signal is shorter than one analysis frame."""


class FrameTooLongError(ToolkitError):
    """Frame does not fit in the requested DFT size."""


class ZeroFrameError(ToolkitError):
    """Frame is identically zero where a non-zero frame is required."""


class RadiusNonPositiveError(ToolkitError):
    """Chirp analysis radius must be strictly positive."""


class UnwrapFailureError(ToolkitError):
    """Phase unwrapping is inconsistent with the group delay of the frame."""


class DegenerateCycleError(ToolkitError):
    """Glottal cycle is flat or monotone, landmarks are undefined."""


class EmptyStreamError(ToolkitError):
    """No valued instant to interpolate from."""


class TooFewFramesError(ToolkitError):
    """Not enough frames for a frame-to-frame measure."""


class WrongKindError(ToolkitError):
    """Spectrogram kind does not fit the operation."""


class EmptyAfterAlignmentError(ToolkitError):
    """No feature row survives stream alignment."""


class TooFewSamplesError(ToolkitError):
    """Fewer samples than histogram bins."""


class EmptyInputError(ToolkitError):
    """Operation needs at least one element."""


class ZeroLabelEntropyError(ToolkitError):
    """Labels hold a single class, normalization is undefined."""


class SingleClassError(ToolkitError):
    """Both classes are required."""


class ArityMismatchError(ToolkitError):
    """Feature vector length does not match the model."""


class InvalidInputError(ArityMismatchError):
    """Feature vector contains non-finite values."""


class TooFewPatientsError(ToolkitError):
    """Not enough patients per class for the requested number of folds."""


class InvalidConfigError(ToolkitError):
    """Configuration value or key is not valid."""


class IoFailureError(ToolkitError):
    """Artifact could not be written or read."""
