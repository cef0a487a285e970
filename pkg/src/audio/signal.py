"""Audio ingestion, framing and DFT shared by every analysis module"""

import logging
import os
from dataclasses import dataclass
from enum import Enum
from math import gcd

import numpy as np
import soundfile as sf
from scipy.signal import resample_poly

from utils.errors import (
    AudioNotFoundError,
    UnsupportedEncodingError,
    RateMismatchError,
    SignalTooShortError,
    FrameTooLongError,
    IoFailureError,
)

logger = logging.getLogger(__name__)

ANALYSIS_RATE = 16000  # Every recording is analysed at 16 kHz
DEFAULT_N_FFT = 1024
SUPPORTED_SUBTYPES = ("PCM_U8", "PCM_S8", "PCM_16", "PCM_24", "PCM_32", "FLOAT")


class WindowKind(Enum):
    """Analysis window applied to frames."""

    BLACKMAN = "blackman"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class AudioSignal:
    """Mono sampled waveform."""

    samples: np.ndarray
    sample_rate: int = ANALYSIS_RATE
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioSignal holds a single channel")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        """Duration in seconds."""
        return len(self) / self.sample_rate

    def scaled(self, gain: float):
        """Returns a copy multiplied by a constant gain."""
        return AudioSignal(self.samples * gain, self.sample_rate, self.source_id)


@dataclass(frozen=True, eq=False)
class Frame:
    """One windowed analysis frame."""

    samples: np.ndarray
    start_sample: int = 0
    window_kind: WindowKind = WindowKind.NONE
    sample_rate: int = ANALYSIS_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    """Full-length DFT of a frame."""

    values: np.ndarray
    n_fft: int
    bin_hz: float

    @property
    def magnitude(self) -> np.ndarray:
        """|X(k)| for all bins."""
        return np.abs(self.values)


def load_wav(path: str, strict_rate: bool = False, target_rate: int = ANALYSIS_RATE) -> AudioSignal:
    """Reads a PCM WAV file as a mono signal at the analysis rate.

    Multichannel files are averaged to mono, other rates are resampled with a polyphase
    windowed-sinc filter unless strict_rate forbids it.

    Args:
        path: WAV file path
        strict_rate: reject instead of resampling when the file rate differs
        target_rate: analysis sample rate
    """
    if not os.path.exists(path):
        raise AudioNotFoundError(f"audio file '{path}' not found")

    try:
        info = sf.info(path)
    except RuntimeError as err:
        raise UnsupportedEncodingError(f"'{path}' is not a readable audio file: {err}") from err

    if info.format not in ("WAV", "WAVEX") or info.subtype not in SUPPORTED_SUBTYPES:
        raise UnsupportedEncodingError(f"'{path}' is {info.format}/{info.subtype}, expected PCM or float WAV")

    data, rate = sf.read(path, dtype="float64", always_2d=True)
    samples = data.mean(axis=1)

    if rate != target_rate:
        if strict_rate:
            raise RateMismatchError(f"'{path}' is sampled at {rate} Hz, expected {target_rate} Hz")
        divisor = gcd(int(rate), int(target_rate))
        samples = resample_poly(samples, target_rate // divisor, int(rate) // divisor)
        logger.info("Resampled '%s' from %d Hz to %d Hz", path, rate, target_rate)

    samples = np.clip(samples, -1.0, 1.0)
    return AudioSignal(samples, target_rate, source_id=os.path.basename(path))


def write_wav(signal: AudioSignal, path: str, subtype: str = "PCM_16"):
    """Writes a signal as WAV."""
    try:
        sf.write(path, np.clip(signal.samples, -1.0, 1.0), signal.sample_rate, subtype=subtype)
    except (RuntimeError, OSError) as err:
        raise IoFailureError(f"cannot write '{path}': {err}") from err


def analysis_window(length: int, kind: WindowKind = WindowKind.BLACKMAN) -> np.ndarray:
    """Classic Blackman window 0.42 - 0.5 cos(2πn/(L-1)) + 0.08 cos(4πn/(L-1)), or ones."""
    if kind == WindowKind.BLACKMAN:
        return np.blackman(length)
    return np.ones(length)


def frame_signal(
    signal: AudioSignal, frame_ms: float = 30.0, hop_ms: float = 10.0, window: WindowKind = WindowKind.BLACKMAN
) -> list[Frame]:
    """Cuts the signal into overlapping windowed frames.

    Args:
        signal: input signal
        frame_ms: frame length in milliseconds
        hop_ms: shift between consecutive frames in milliseconds
        window: window applied to every frame
    """
    frame_len = int(round(signal.sample_rate * frame_ms / 1000))
    hop_len = int(round(signal.sample_rate * hop_ms / 1000))
    if len(signal) < frame_len:
        raise SignalTooShortError(f"signal has {len(signal)} samples, one frame needs {frame_len}")

    weights = analysis_window(frame_len, window)
    n_frames = (len(signal) - frame_len) // hop_len + 1
    view = np.lib.stride_tricks.sliding_window_view(signal.samples, frame_len)[::hop_len][:n_frames]

    return [
        Frame(view[i] * weights, start_sample=i * hop_len, window_kind=window, sample_rate=signal.sample_rate)
        for i in range(n_frames)
    ]


def frames_to_matrix(frames) -> np.ndarray:
    """Stacks frames (or raw sample vectors) into an [n_frames x frame_len] matrix."""
    return np.stack([np.asarray(f.samples if isinstance(f, Frame) else f, dtype=np.float64) for f in frames])


def frame_centers_s(n_frames: int, sample_rate: int = ANALYSIS_RATE, frame_ms: float = 30.0, hop_ms: float = 10.0):
    """Times of the frame centres in seconds, the 10 ms feature grid."""
    frame_len = int(round(sample_rate * frame_ms / 1000))
    hop_len = int(round(sample_rate * hop_ms / 1000))
    return (np.arange(n_frames) * hop_len + frame_len / 2) / sample_rate


def dft(frame, n_fft: int = DEFAULT_N_FFT) -> ComplexSpectrum:
    """Zero-padded n_fft-point DFT of a frame.

    Args:
        frame: Frame or real sample vector
        n_fft: number of DFT bins
    """
    samples = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    sample_rate = frame.sample_rate if isinstance(frame, Frame) else ANALYSIS_RATE
    if samples.shape[0] > n_fft:
        raise FrameTooLongError(f"frame of {samples.shape[0]} samples does not fit {n_fft} bins")
    return ComplexSpectrum(np.fft.fft(samples, n_fft), n_fft, sample_rate / n_fft)


def idft(spectrum: ComplexSpectrum, length: int | None = None) -> np.ndarray:
    """Inverse of dft, returns the real part truncated to length samples."""
    samples = np.fft.ifft(spectrum.values, spectrum.n_fft).real
    return samples if length is None else samples[:length]
