"""Glottal closure instant detection from the linear-prediction residual.

Candidates are negative peaks of the polarity-normalized LP residual inside voiced frames. A dynamic
programming pass keeps the chain of candidates that maximizes peak strength while keeping the
spacing close to the local pitch period.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.linalg import solve_toeplitz
from scipy.ndimage import uniform_filter1d
from scipy.signal import lfilter
from scipy.stats import skew

from audio.pitch import PitchTrack
from audio.signal import AudioSignal, ANALYSIS_RATE
from utils.args_config import GciConfig
from utils.errors import IoFailureError

logger = logging.getLogger(__name__)

VOICE_F0_RANGE_HZ = (60.0, 500.0)  # Bounds the spacing of linked instants


@dataclass(frozen=True, eq=False)
class GciSequence:
    """Sample indices of glottal closures, strictly increasing.

    breaks holds the indices of instants that open a new voiced run, the gap before them is not a
    pitch period.
    """

    instants: np.ndarray
    sample_rate: int = ANALYSIS_RATE
    no_voiced_content: bool = False
    breaks: np.ndarray = ()

    def __post_init__(self):
        instants = np.asarray(self.instants, dtype=np.int64).reshape(-1)
        if np.any(np.diff(instants) <= 0):
            raise ValueError("GCI instants must be strictly increasing")
        breaks = np.unique(np.asarray(self.breaks, dtype=np.int64).reshape(-1))
        if breaks.size and (breaks[0] < 1 or breaks[-1] >= instants.shape[0]):
            raise ValueError("run breaks must index instants after the first")
        instants.setflags(write=False)
        breaks.setflags(write=False)
        object.__setattr__(self, "instants", instants)
        object.__setattr__(self, "breaks", breaks)

    def __len__(self):
        return self.instants.shape[0]

    @property
    def times_s(self) -> np.ndarray:
        """Instants in seconds."""
        return self.instants / self.sample_rate

    def _linked(self) -> np.ndarray:
        linked = np.ones(max(len(self) - 1, 0), dtype=bool)
        linked[self.breaks - 1] = False
        return linked

    @property
    def spacing(self) -> np.ndarray:
        """Gaps between consecutive instants of the same voiced run in samples."""
        return np.diff(self.instants)[self._linked()]

    def neighbour_spacing(self, index: int) -> np.ndarray:
        """Gaps from an instant to its neighbours in the same voiced run."""
        lo, hi = max(0, index - 1), index + 1
        return np.diff(self.instants)[lo:hi][self._linked()[lo:hi]]


def lp_residual(signal: AudioSignal, cfg: GciConfig | None = None) -> np.ndarray:
    """Inverse-filtered signal, one LP model per hop.

    Each hop is filtered with coefficients fitted on the Hamming-windowed frame centred on it,
    the filter memory taken from the preceding samples.

    Args:
        signal: input signal
        cfg: LP order and analysis frame length
    """
    cfg = cfg or GciConfig()
    x = signal.samples
    order = cfg.lp_order
    frame_len = int(round(signal.sample_rate * cfg.lp_frame_ms / 1000))
    hop = frame_len // 2
    window = np.hamming(frame_len)
    padded = np.concatenate([np.zeros(frame_len), x, np.zeros(frame_len)])

    residual = np.zeros_like(x)
    for start in range(0, len(x), hop):
        stop = min(start + hop, len(x))
        # Frame centred on the hop, in padded coordinates
        centre = frame_len + (start + stop) // 2
        segment = padded[centre - frame_len // 2 : centre - frame_len // 2 + frame_len] * window

        autocorr = np.correlate(segment, segment, "full")[frame_len - 1 : frame_len + order]
        if autocorr[0] <= 0:
            residual[start:stop] = x[start:stop]
            continue
        autocorr[0] *= 1 + 1e-9  # White-noise correction
        coeffs = solve_toeplitz(autocorr[:-1], autocorr[1:])

        context = max(0, start - order)
        filtered = lfilter(np.concatenate([[1.0], -coeffs]), [1.0], x[context:stop])
        residual[start:stop] = filtered[start - context :]
    return residual


def _sample_periods(n_samples: int, pitch: PitchTrack) -> np.ndarray:
    """Local pitch period at every sample, 0 where unvoiced."""
    hop = pitch.sample_rate * pitch.hop_ms / 1000
    half = pitch.sample_rate * pitch.frame_ms / 2000
    frame_idx = np.clip(np.round((np.arange(n_samples) - half) / hop), 0, max(len(pitch) - 1, 0)).astype(int)
    return pitch.t0_samples[frame_idx].astype(np.float64)


def _select_chain(
    candidates: np.ndarray,
    strength: np.ndarray,
    periods: np.ndarray,
    cfg: GciConfig,
    spacing_range: tuple = (0, np.inf),
) -> tuple[np.ndarray, np.ndarray]:
    """Best-scoring candidate chain under the pitch-consistency constraint.

    Returns the chosen candidates and the positions in the chain where an unvoiced gap was bridged.
    """
    n = candidates.shape[0]
    score = np.empty(n)
    previous = np.full(n, -1)
    bridged = np.zeros(n, dtype=bool)
    bridge_ptr = 0
    bridge_best = -np.inf
    bridge_idx = -1
    min_spacing, max_spacing = spacing_range

    for i in range(n):
        period = periods[i]
        # Starting a new chain always pays the restart penalty
        score[i] = strength[i] - cfg.restart_penalty

        # Chains ending at least two periods back may bridge a gap
        while bridge_ptr < i and candidates[i] - candidates[bridge_ptr] >= 2 * period:
            if score[bridge_ptr] > bridge_best:
                bridge_best, bridge_idx = score[bridge_ptr], bridge_ptr
            bridge_ptr += 1
        if bridge_idx >= 0 and bridge_best + strength[i] - cfg.restart_penalty > score[i]:
            score[i] = bridge_best + strength[i] - cfg.restart_penalty
            previous[i], bridged[i] = bridge_idx, True

        j = i - 1
        while j >= 0 and candidates[i] - candidates[j] <= (1 + cfg.period_tolerance) * period:
            gap = candidates[i] - candidates[j]
            deviation = abs(gap / period - 1)
            if deviation <= cfg.period_tolerance and min_spacing <= gap <= max_spacing:
                value = score[j] + strength[i] - cfg.spacing_penalty * deviation
                if value > score[i]:
                    score[i], previous[i], bridged[i] = value, j, False
            j -= 1

    chain, gaps = [], []
    i = int(np.argmax(score))
    while i >= 0:
        chain.append(candidates[i])
        gaps.append(bridged[i])
        i = previous[i]
    breaks = np.flatnonzero(gaps[::-1])
    return np.array(chain[::-1], dtype=np.int64), breaks


def detect_gci(signal: AudioSignal, pitch: PitchTrack, cfg: GciConfig | None = None) -> GciSequence:
    """Locates glottal closure instants.

    Args:
        signal: input signal
        pitch: pitch track of the signal, gives the voicing and the local period
        cfg: residual and selection settings
    """
    cfg = cfg or GciConfig()
    periods = _sample_periods(len(signal), pitch) if len(pitch) else np.zeros(len(signal))
    voiced = periods > 0
    if not np.any(voiced):
        logger.warning("No voiced content in '%s', no GCI detected", signal.source_id)
        return GciSequence(np.zeros(0), signal.sample_rate, no_voiced_content=True)

    residual = lp_residual(signal, cfg)
    if skew(residual[voiced]) > 0:
        residual = -residual

    rms_len = max(3, int(round(2 * np.median(periods[voiced]))))
    local_rms = np.sqrt(uniform_filter1d(residual**2, rms_len, mode="nearest")) + np.finfo(float).tiny
    strength = -residual / local_rms

    inner = np.arange(1, len(residual) - 1)
    is_min = (residual[inner] <= residual[inner - 1]) & (residual[inner] < residual[inner + 1])
    candidates = inner[is_min & voiced[inner] & (strength[inner] >= cfg.min_strength)]
    if candidates.shape[0] == 0:
        logger.warning("No residual peak strong enough in '%s'", signal.source_id)
        return GciSequence(np.zeros(0), signal.sample_rate)

    spacing_range = (
        int(np.floor(signal.sample_rate / VOICE_F0_RANGE_HZ[1])),
        int(np.ceil(signal.sample_rate / VOICE_F0_RANGE_HZ[0])),
    )
    instants, breaks = _select_chain(candidates, strength[candidates], periods[candidates], cfg, spacing_range)
    logger.debug("Detected %d GCIs among %d candidates in '%s'", len(instants), len(candidates), signal.source_id)
    return GciSequence(instants, signal.sample_rate, breaks=breaks)


def write_gci_csv(gci: GciSequence, path: str, config_hash: str = ""):
    """GCI table with one instant per row."""
    table = pd.DataFrame({"sample": gci.instants, "time_s": gci.times_s})
    try:
        with open(path, "w", encoding="UTF-8", newline="") as file:
            file.write(f"# config_hash={config_hash}\n")
            table.to_csv(file, index=False, float_format="%.17g")
    except OSError as err:
        raise IoFailureError(f"cannot write '{path}': {err}") from err
