"""Autocorrelation-based fundamental frequency tracking"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import medfilt

from audio.signal import AudioSignal, ANALYSIS_RATE
from utils.args_config import PitchConfig

logger = logging.getLogger(__name__)

PEAK_PREFERENCE = 0.9  # Earliest peak within this fraction of the best one wins (avoids octave errors)


@dataclass(frozen=True, eq=False)
class PitchTrack:
    """Per-frame F0 and pitch period, 0 for unvoiced frames."""

    f0_hz: np.ndarray
    t0_samples: np.ndarray
    sample_rate: int = ANALYSIS_RATE
    frame_ms: float = 30.0
    hop_ms: float = 10.0

    def __len__(self):
        return self.f0_hz.shape[0]

    @property
    def voiced(self) -> np.ndarray:
        """Boolean voicing mask."""
        return self.f0_hz > 0

    def median_voiced_f0(self, default: float | None = None) -> float | None:
        """Median F0 over voiced frames, default if nothing is voiced."""
        if not np.any(self.voiced):
            return default
        return float(np.median(self.f0_hz[self.voiced]))

    def frame_at_sample(self, sample: int) -> int:
        """Index of the frame whose centre is closest to a sample index."""
        hop = self.sample_rate * self.hop_ms / 1000
        half = self.sample_rate * self.frame_ms / 2000
        return int(np.clip(np.round((sample - half) / hop), 0, len(self) - 1))

    def period_at_sample(self, sample: int) -> int:
        """Local pitch period in samples, 0 when the frame is unvoiced."""
        return int(self.t0_samples[self.frame_at_sample(sample)])


def _normalized_autocorrelation(frames: np.ndarray, max_lag: int) -> np.ndarray:
    """Cross-correlation of each frame with its lagged self, normalized by the overlapping energies."""
    length = frames.shape[1]
    n_fft = int(2 ** np.ceil(np.log2(2 * length)))
    spectrum = np.fft.rfft(frames, n_fft, axis=1)
    corr = np.fft.irfft(np.abs(spectrum) ** 2, n_fft, axis=1)[:, : max_lag + 1]

    energy = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    head = energy[:, length - lags]  # Energy of x(0 .. L-1-lag)
    tail = energy[:, [length]] - energy[:, lags]  # Energy of x(lag .. L-1)
    denom = np.sqrt(head * tail)

    out = np.zeros_like(corr)
    valid = denom > 1e-12 * max(float(energy[:, -1].max()), 1e-300)
    out[valid] = corr[valid] / denom[valid]
    return out


def _pick_lag(nccf: np.ndarray, min_lag: int, max_lag: int) -> float:
    """Earliest strong local maximum in the lag range, refined with a parabola."""
    segment = nccf[min_lag : max_lag + 1]
    best = segment.max()

    lag = min_lag + int(np.argmax(segment))
    for i in range(1, segment.shape[0] - 1):
        if segment[i] >= segment[i - 1] and segment[i] > segment[i + 1] and segment[i] >= PEAK_PREFERENCE * best:
            lag = min_lag + i
            break

    # Parabolic interpolation around the integer peak
    if min_lag < lag < max_lag:
        left, centre, right = nccf[lag - 1], nccf[lag], nccf[lag + 1]
        curvature = left - 2 * centre + right
        if curvature < 0:
            return lag + 0.5 * (left - right) / curvature
    return float(lag)


def estimate_f0(
    signal: AudioSignal, frame_ms: float = 30.0, hop_ms: float = 10.0, config: PitchConfig | None = None
) -> PitchTrack:
    """Tracks F0 on the analysis frame grid.

    Frames whose normalized autocorrelation peak stays below the voicing threshold are unvoiced.
    The raw track is median filtered.

    Args:
        signal: input signal
        frame_ms: frame length in milliseconds
        hop_ms: frame shift in milliseconds
        config: tracker settings
    """
    config = config or PitchConfig()
    rate = signal.sample_rate
    frame_len = int(round(rate * frame_ms / 1000))
    hop_len = int(round(rate * hop_ms / 1000))

    if len(signal) < frame_len:
        logger.warning("Signal '%s' shorter than one frame, pitch track is empty", signal.source_id)
        return PitchTrack(np.zeros(0), np.zeros(0, dtype=int), rate, frame_ms, hop_ms)

    n_frames = (len(signal) - frame_len) // hop_len + 1
    frames = np.lib.stride_tricks.sliding_window_view(signal.samples, frame_len)[::hop_len][:n_frames]
    frames = frames - frames.mean(axis=1, keepdims=True)

    min_lag = int(np.ceil(rate / config.f0_max))
    max_lag = min(int(np.floor(rate / config.f0_min)), frame_len - 2)
    nccf = _normalized_autocorrelation(frames, max_lag + 1)

    f0 = np.zeros(n_frames)
    for i in range(n_frames):
        if nccf[i, min_lag : max_lag + 1].max() < config.voicing_threshold:
            continue
        lag = _pick_lag(nccf[i], min_lag, max_lag)
        f0[i] = np.clip(rate / lag, config.f0_min, config.f0_max)

    if n_frames >= config.median_len:
        f0 = medfilt(f0, config.median_len)

    t0 = np.zeros(n_frames, dtype=int)
    voiced = f0 > 0
    t0[voiced] = np.round(rate / f0[voiced]).astype(int)

    logger.debug("Pitch track of '%s': %d/%d voiced frames", signal.source_id, int(voiced.sum()), n_frames)
    return PitchTrack(f0, t0, rate, frame_ms, hop_ms)
