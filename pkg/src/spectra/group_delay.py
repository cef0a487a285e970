"""Magnitude and group delay spectrograms.

Five time-frequency representations are computed on a shared frame grid:

- FM: Fourier magnitude |X(w)|.
- SMOOTH: FM smoothed by a pitch-adaptive triangular kernel (a lightweight stand-in for a
  STRAIGHT-style spectrogram, not the full vocoder analysis).
- MODGD: modified group delay, group delay with a cepstrally smoothed magnitude in the
  denominator and compressed by sign(t)|t|^alpha.
- PPGD: product of power spectrum and group delay, X_R Y_R + X_I Y_I with no division.
- CGD: chirp group delay of the zero-phase version of the frame, evaluated on |z| = rho.

Group delays are computed without unwrapping from X = DFT(x) and Y = DFT(n x(n)) and are
expressed in samples. Bins with |X|^2 below GUARD_EPS times the frame maximum are set to 0.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import convolve1d
from scipy.signal.windows import triang

from audio.pitch import PitchTrack
from audio.signal import Frame, ComplexSpectrum, frames_to_matrix, ANALYSIS_RATE, DEFAULT_N_FFT
from utils.args_config import ModGdConfig, CgdConfig
from utils.errors import ZeroFrameError, RadiusNonPositiveError, FrameTooLongError

logger = logging.getLogger(__name__)

GUARD_EPS = 1e-10  # Relative power below which a bin's delay is undefined
FALLBACK_F0_HZ = 100.0  # Smoothing kernel for recordings without any voiced frame

__all__ = [
    "SpectrogramKind",
    "Spectrogram",
    "ModGdConfig",
    "CgdConfig",
    "group_delay_raw",
    "fm_spectrogram",
    "smoothed_spectrogram",
    "modgd_spectrogram",
    "ppgd_spectrogram",
    "chirp_dft",
    "cgd_spectrogram",
    "compute_spectrograms",
]


class SpectrogramKind(Enum):
    """Representation held by a spectrogram."""

    FM = "fm"
    SMOOTH = "smooth"
    MODGD = "modgd"
    PPGD = "ppgd"
    CGD = "cgd"


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Time x frequency matrix over the non-negative bins."""

    data: np.ndarray
    kind: SpectrogramKind
    hop_ms: float = 10.0
    bin_hz: float = ANALYSIS_RATE / DEFAULT_N_FFT

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("spectrogram data must be a matrix")
        if not np.all(np.isfinite(data)):
            raise ValueError(f"{self.kind.name} spectrogram holds non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        """Number of rows (frames)."""
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        """Number of columns (frequency bins)."""
        return self.data.shape[1]


def _matrix(frames, n_fft: int) -> tuple[np.ndarray, float]:
    """Frame matrix and sample rate, checking that frames fit the DFT."""
    if isinstance(frames, Frame) or (isinstance(frames, np.ndarray) and frames.ndim == 1):
        frames = [frames]
    frames = list(frames)
    if not frames:
        raise ValueError("at least one frame is required")
    matrix = frames_to_matrix(frames)
    if matrix.shape[1] > n_fft:
        raise FrameTooLongError(f"frames of {matrix.shape[1]} samples do not fit {n_fft} bins")
    rate = frames[0].sample_rate if isinstance(frames[0], Frame) else ANALYSIS_RATE
    return matrix, rate


def _check_non_zero(matrix: np.ndarray):
    """Raise if every frame is silent, warn about silent frames otherwise."""
    silent = ~np.any(matrix != 0, axis=1)
    if np.all(silent):
        raise ZeroFrameError("group delay is undefined for all-zero frames")
    if np.any(silent):
        logger.warning("%d silent frame(s) give all-zero group delay rows", int(silent.sum()))


def _delay_terms(matrix: np.ndarray, n_fft: int):
    """Returns X = DFT(x), Y = DFT(n x(n)) over the non-negative bins."""
    ramp = np.arange(matrix.shape[1])
    return np.fft.rfft(matrix, n_fft, axis=1), np.fft.rfft(matrix * ramp, n_fft, axis=1)


def _guarded(power: np.ndarray) -> np.ndarray:
    """Mask of bins whose power is too small relative to the frame maximum, every bin of a silent frame."""
    peak = power.max(axis=1, keepdims=True)
    return (power < GUARD_EPS * peak) | (peak == 0)


def _group_delay(x_spec: np.ndarray, y_spec: np.ndarray) -> np.ndarray:
    """(X_R Y_R + X_I Y_I) / |X|^2 with guarded bins set to 0."""
    numerator = x_spec.real * y_spec.real + x_spec.imag * y_spec.imag
    power = np.abs(x_spec) ** 2
    guard = _guarded(power)
    tau = np.zeros_like(numerator)
    np.divide(numerator, power, out=tau, where=~guard)
    return tau


def group_delay_raw(frame, n_fft: int = DEFAULT_N_FFT) -> np.ndarray:
    """Group delay of one frame in samples, without phase unwrapping.

    Args:
        frame: Frame or real sample vector
        n_fft: DFT size, the result holds n_fft // 2 + 1 bins
    """
    matrix, _ = _matrix(frame, n_fft)
    if not np.any(matrix):
        raise ZeroFrameError("group delay is undefined for an all-zero frame")
    x_spec, y_spec = _delay_terms(matrix, n_fft)
    return _group_delay(x_spec, y_spec)[0]


def fm_spectrogram(frames, n_fft: int = DEFAULT_N_FFT, hop_ms: float = 10.0) -> Spectrogram:
    """Fourier magnitude spectrogram."""
    matrix, rate = _matrix(frames, n_fft)
    return Spectrogram(np.abs(np.fft.rfft(matrix, n_fft, axis=1)), SpectrogramKind.FM, hop_ms, rate / n_fft)


def _odd_triangle(width: int) -> np.ndarray:
    """Unit-sum triangular kernel spanning at least width taps (odd length)."""
    width = max(1, int(width))
    if width % 2 == 0:
        width += 1
    kernel = triang(width)
    return kernel / kernel.sum()


def smoothed_spectrogram(frames, pitch: PitchTrack, n_fft: int = DEFAULT_N_FFT) -> Spectrogram:
    """Pitch-adaptive smoothing of the FM spectrogram.

    Each frame is smoothed by a separable triangular kernel one F0 wide in frequency and one
    pitch period wide in time. Unvoiced frames use the recording's median voiced F0.

    Args:
        frames: analysis frames
        pitch: pitch track on the same frame grid
        n_fft: DFT size
    """
    fm = fm_spectrogram(frames, n_fft, pitch.hop_ms)
    if len(pitch) != fm.n_frames:
        raise ValueError(f"pitch track has {len(pitch)} frames, spectrogram has {fm.n_frames}")

    fallback = pitch.median_voiced_f0()
    if fallback is None:
        logger.warning("No voiced frame, smoothing with a %.0f Hz kernel", FALLBACK_F0_HZ)
        fallback = FALLBACK_F0_HZ
    f0 = np.where(pitch.voiced, pitch.f0_hz, fallback)

    freq_width = np.ceil(f0 / fm.bin_hz).astype(int)
    time_width = np.ceil(1000.0 / f0 / pitch.hop_ms).astype(int)

    # Frequency pass, rows sharing a kernel width are filtered together
    along_freq = np.empty_like(fm.data)
    for width in np.unique(freq_width):
        rows = freq_width == width
        along_freq[rows] = convolve1d(fm.data[rows], _odd_triangle(width), axis=1, mode="nearest")

    # Time pass, every output frame uses its own period-wide kernel
    smoothed = np.empty_like(along_freq)
    last = fm.n_frames - 1
    for t in range(fm.n_frames):
        kernel = _odd_triangle(time_width[t])
        half = kernel.shape[0] // 2
        rows = np.clip(np.arange(t - half, t + half + 1), 0, last)
        smoothed[t] = kernel @ along_freq[rows]

    return Spectrogram(smoothed, SpectrogramKind.SMOOTH, pitch.hop_ms, fm.bin_hz)


def _cepstral_smoothing(magnitude: np.ndarray, floor: np.ndarray, n_fft: int, lifter_len: int) -> np.ndarray:
    """Magnitude envelope keeping the first lifter_len quefrencies of log|X|."""
    log_mag = np.log(np.maximum(magnitude, floor))
    cepstrum = np.fft.irfft(log_mag, n_fft, axis=1)
    quefrency = np.arange(n_fft)
    lifter = (quefrency < lifter_len) | (quefrency > n_fft - lifter_len)
    return np.exp(np.fft.rfft(cepstrum * lifter, n_fft, axis=1).real)


def modgd_spectrogram(
    frames, cfg: ModGdConfig | None = None, n_fft: int = DEFAULT_N_FFT, hop_ms: float = 10.0
) -> Spectrogram:
    """Modified group delay spectrogram.

    Args:
        frames: analysis frames
        cfg: alpha, gamma and lifter length
        n_fft: DFT size
        hop_ms: frame shift, stored on the result
    """
    cfg = cfg or ModGdConfig()
    matrix, rate = _matrix(frames, n_fft)
    _check_non_zero(matrix)

    x_spec, y_spec = _delay_terms(matrix, n_fft)
    numerator = x_spec.real * y_spec.real + x_spec.imag * y_spec.imag
    magnitude = np.abs(x_spec)
    power = magnitude**2
    guard = _guarded(power)

    floor = np.sqrt(GUARD_EPS * power.max(axis=1, keepdims=True)) + np.finfo(float).tiny
    envelope = _cepstral_smoothing(magnitude, floor, n_fft, cfg.lifter_len)

    tau = np.zeros_like(numerator)
    np.divide(numerator, envelope ** (2 * cfg.gamma), out=tau, where=~guard)
    return Spectrogram(np.sign(tau) * np.abs(tau) ** cfg.alpha, SpectrogramKind.MODGD, hop_ms, rate / n_fft)


def ppgd_spectrogram(frames, n_fft: int = DEFAULT_N_FFT, hop_ms: float = 10.0) -> Spectrogram:
    """Product of power spectrum and group delay, |X|^2 tau = X_R Y_R + X_I Y_I."""
    matrix, rate = _matrix(frames, n_fft)
    _check_non_zero(matrix)
    x_spec, y_spec = _delay_terms(matrix, n_fft)
    product = x_spec.real * y_spec.real + x_spec.imag * y_spec.imag
    return Spectrogram(product, SpectrogramKind.PPGD, hop_ms, rate / n_fft)


def chirp_dft(x, rho: float, n_fft: int = DEFAULT_N_FFT, sample_rate: int = ANALYSIS_RATE) -> ComplexSpectrum:
    """z-transform of x sampled on the circle |z| = rho.

    Equivalent to the DFT of the exponentially weighted sequence x(n) rho^-n.

    Args:
        x: real sequence
        rho: radius of the analysis circle
        n_fft: number of points on the circle
        sample_rate: used for the bin spacing only
    """
    if rho <= 0:
        raise RadiusNonPositiveError(f"chirp radius must be positive, got {rho}")
    x = np.asarray(x, dtype=np.float64)
    weighted = x * rho ** -np.arange(x.shape[0], dtype=np.float64)
    return ComplexSpectrum(np.fft.fft(weighted, n_fft), n_fft, sample_rate / n_fft)


def _zero_phase(matrix: np.ndarray, n_fft: int) -> np.ndarray:
    """IDFT of |X|: even-symmetric sequence, peak at n = 0, anticausal half at the tail."""
    return np.fft.irfft(np.abs(np.fft.rfft(matrix, n_fft, axis=1)), n_fft, axis=1)


def cgd_spectrogram(
    frames, cfg: CgdConfig | None = None, n_fft: int = DEFAULT_N_FFT, hop_ms: float = 10.0
) -> Spectrogram:
    """Chirp group delay of the zero-phase frames.

    The delay ramp uses the signed time index of the zero-phase sequence, with zero weight at
    the unpaired n_fft/2 sample, so a real spectrum has zero delay. The chirp weighting rho^-n
    runs over the stored index, which damps the wrapped anticausal half.

    Args:
        frames: analysis frames
        cfg: analysis circle radius
        n_fft: DFT size
        hop_ms: frame shift, stored on the result
    """
    cfg = cfg or CgdConfig()
    matrix, rate = _matrix(frames, n_fft)
    _check_non_zero(matrix)

    zero_phase = _zero_phase(matrix, n_fft)
    index = np.arange(n_fft)
    signed = np.where(index < n_fft // 2, index, index - n_fft)
    signed[n_fft // 2] = 0
    weighted = zero_phase * float(cfg.rho) ** -index.astype(np.float64)

    z_spec = np.fft.rfft(weighted, n_fft, axis=1)
    y_spec = np.fft.rfft(weighted * signed, n_fft, axis=1)
    return Spectrogram(_group_delay(z_spec, y_spec), SpectrogramKind.CGD, hop_ms, rate / n_fft)


def compute_spectrograms(
    frames,
    pitch: PitchTrack,
    modgd: ModGdConfig | None = None,
    cgd: CgdConfig | None = None,
    n_fft: int = DEFAULT_N_FFT,
    jobs: int = 1,
) -> dict[SpectrogramKind, Spectrogram]:
    """All five representations on the same frame grid.

    Args:
        frames: analysis frames
        pitch: pitch track aligned with frames
        modgd: ModGD parameters
        cgd: CGD parameters
        n_fft: DFT size
        jobs: worker threads, results do not depend on it
    """
    frames = list(frames)
    hop_ms = pitch.hop_ms
    tasks = {
        SpectrogramKind.FM: lambda: fm_spectrogram(frames, n_fft, hop_ms),
        SpectrogramKind.SMOOTH: lambda: smoothed_spectrogram(frames, pitch, n_fft),
        SpectrogramKind.MODGD: lambda: modgd_spectrogram(frames, modgd, n_fft, hop_ms),
        SpectrogramKind.PPGD: lambda: ppgd_spectrogram(frames, n_fft, hop_ms),
        SpectrogramKind.CGD: lambda: cgd_spectrogram(frames, cgd, n_fft, hop_ms),
    }
    if jobs <= 1:
        return {kind: task() for kind, task in tasks.items()}

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {kind: pool.submit(task) for kind, task in tasks.items()}
        return {kind: futures[kind].result() for kind in tasks}
