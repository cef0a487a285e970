"""Complex cepstrum decomposition of voiced speech into causal and anticausal parts.

The anticausal (maximum-phase) part of a GCI-centred frame approximates the glottal open phase. Its
landmarks give two time constants per cycle, which are then resampled onto the frame grid.
"""

import logging
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from audio.pitch import PitchTrack
from audio.signal import AudioSignal, ANALYSIS_RATE
from glottal.gci import GciSequence
from utils.args_config import CcdConfig
from utils.errors import UnwrapFailureError, DegenerateCycleError, EmptyStreamError, ZeroFrameError, IoFailureError

logger = logging.getLogger(__name__)

GUARD_EPS = 1e-10  # Relative power below which a bin is ignored by the unwrap check


@dataclass(frozen=True, eq=False)
class MixedPhaseParts:
    """Split of a frame spectrum, X(k) = gain * C(k) * A(k) * exp(-j 2 pi k delay / N)."""

    cepstrum: np.ndarray  # Complex cepstrum, negative quefrencies wrapped to the tail
    gain: float
    delay: int
    n_fft: int

    @property
    def causal_cepstrum(self) -> np.ndarray:
        """Quefrencies 1 .. N/2."""
        out = np.zeros_like(self.cepstrum)
        out[1 : self.n_fft // 2 + 1] = self.cepstrum[1 : self.n_fft // 2 + 1]
        return out

    @property
    def anticausal_cepstrum(self) -> np.ndarray:
        """Strictly negative quefrencies."""
        out = np.zeros_like(self.cepstrum)
        out[self.n_fft // 2 + 1 :] = self.cepstrum[self.n_fft // 2 + 1 :]
        return out

    @property
    def causal_spectrum(self) -> np.ndarray:
        """Minimum-phase spectrum C(k)."""
        return np.exp(np.fft.fft(self.causal_cepstrum))

    @property
    def anticausal_spectrum(self) -> np.ndarray:
        """Maximum-phase spectrum A(k)."""
        return np.exp(np.fft.fft(self.anticausal_cepstrum))

    @property
    def causal_waveform(self) -> np.ndarray:
        """Minimum-phase part, starts at n = 0 with value 1."""
        return np.fft.ifft(self.causal_spectrum).real

    @property
    def anticausal_waveform(self) -> np.ndarray:
        """Maximum-phase part, ends at n = 0 (stored at index 0) with value 1, earlier samples at the tail."""
        return np.fft.ifft(self.anticausal_spectrum).real

    @property
    def anticausal_energy_ratio(self) -> float:
        """Share of the non-zero quefrency cepstral energy found at negative quefrencies."""
        total = float(np.sum(self.cepstrum[1:] ** 2))
        if total == 0:
            return 0.0
        return float(np.sum(self.anticausal_cepstrum**2)) / total

    def reconstructed_spectrum(self) -> np.ndarray:
        """Spectrum rebuilt from the two parts."""
        k = np.arange(self.n_fft)
        shift = np.exp(-2j * np.pi * k * self.delay / self.n_fft)
        return self.gain * self.causal_spectrum * self.anticausal_spectrum * shift


@dataclass(frozen=True, eq=False)
class GlottalCycle:
    """One period of the anticausal component, the closure at the last sample."""

    waveform: np.ndarray
    t0_samples: int
    instant: int = 0  # GCI the cycle belongs to, in signal samples

    def __post_init__(self):
        waveform = np.asarray(self.waveform, dtype=np.float64)
        if waveform.shape[0] != self.t0_samples:
            raise ValueError(f"cycle of {waveform.shape[0]} samples for a {self.t0_samples}-sample period")
        waveform.setflags(write=False)
        object.__setattr__(self, "waveform", waveform)


@dataclass(frozen=True)
class Landmarks:
    """Opening, maximum and minimum positions within a cycle."""

    t_op: int
    t_max: int
    t_min: int
    degenerate: bool = False  # No minimum after the maximum


@dataclass(frozen=True)
class TimeConstants:
    """Open-phase time constants relative to the period."""

    t1: float
    t2: float
    degenerate: bool = False


@dataclass
class CcdResult:
    """Cycles recovered from a recording and the GCIs whose frame failed."""

    cycles: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.cycles)

    def __len__(self):
        return len(self.cycles)

    def __getitem__(self, index):
        return self.cycles[index]


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(max(n, 1)))))


def _check_unwrap(spectrum: np.ndarray, buffer: np.ndarray, phase: np.ndarray):
    """Compares unwrapped phase increments with those predicted by the group delay."""
    n_fft = buffer.shape[0]
    index = np.arange(n_fft)
    signed = np.where(index < n_fft // 2, index, index - n_fft)
    signed[n_fft // 2] = 0
    ramp_spec = np.fft.rfft(buffer * signed)

    power = np.abs(spectrum) ** 2
    valid = power >= GUARD_EPS * power.max()
    delay = np.zeros_like(power)
    delay[valid] = (spectrum.real * ramp_spec.real + spectrum.imag * ramp_spec.imag)[valid] / power[valid]

    predicted = -2 * np.pi / n_fft * 0.5 * (delay[1:] + delay[:-1])
    both = valid[1:] & valid[:-1]
    deviation = np.abs(np.diff(phase) - predicted)[both]
    if deviation.size and deviation.max() > np.pi:
        raise UnwrapFailureError(f"unwrapped phase departs from the group delay by {deviation.max():.2f} rad")


def complex_cepstrum(x, n_fft: int) -> tuple[np.ndarray, float, int]:
    """Complex cepstrum of a real sequence, linear phase removed.

    Returns the cepstrum, the sign of the spectrum at DC and the number of samples of linear-phase
    advance that was removed.

    Args:
        x: real sequence, at most n_fft samples
        n_fft: transform size, even
    """
    buffer = np.zeros(n_fft)
    x = np.asarray(x, dtype=np.float64)
    buffer[: x.shape[0]] = x
    spectrum = np.fft.rfft(buffer)
    if not np.any(spectrum):
        raise ZeroFrameError("complex cepstrum of an all-zero sequence")

    sign = 1.0
    if spectrum[0].real < 0:
        sign, buffer, spectrum = -1.0, -buffer, -spectrum

    phase = np.unwrap(np.angle(spectrum))
    _check_unwrap(spectrum, buffer, phase)

    half = n_fft // 2
    advance = int(np.round(phase[half] / np.pi))
    phase = phase - np.pi * advance * np.arange(half + 1) / half

    magnitude = np.abs(spectrum)
    floor = np.sqrt(GUARD_EPS) * magnitude.max()
    log_spectrum = np.log(np.maximum(magnitude, floor)) + 1j * phase
    return np.fft.irfft(log_spectrum, n_fft), sign, advance


def decompose_frame(frame, zero_pad: int = 8) -> MixedPhaseParts:
    """Causal/anticausal split of one frame by cepstral sidedness.

    The frame is circularly shifted so its largest-magnitude sample sits at n = 0 before the
    transform.

    Args:
        frame: real sequence
        zero_pad: transform size in multiples of the next power of two above the frame length
    """
    frame = np.asarray(frame, dtype=np.float64)
    n_fft = max(2, zero_pad * _next_pow2(frame.shape[0]))
    peak = int(np.argmax(np.abs(frame)))

    rotated = np.zeros(n_fft)
    rotated[: frame.shape[0]] = frame
    rotated = np.roll(rotated, -peak)

    cepstrum, sign, advance = complex_cepstrum(rotated, n_fft)
    return MixedPhaseParts(cepstrum, sign * float(np.exp(cepstrum[0])), peak - advance, n_fft)


def _local_period(gci: GciSequence, index: int, pitch: PitchTrack) -> int:
    """Pitch period at a GCI, from the track or from the GCI spacing when the frame is unvoiced."""
    period = pitch.period_at_sample(int(gci.instants[index])) if len(pitch) else 0
    if period > 0:
        return period
    neighbours = gci.neighbour_spacing(index)
    return int(np.median(neighbours)) if neighbours.size else 0


def _decompose_at(samples: np.ndarray, instant: int, period: int, cfg: CcdConfig) -> GlottalCycle:
    """Windows the signal around one GCI and extracts the anticausal cycle ending at the GCI."""
    length = max(4, int(round(cfg.window_periods * period)))
    start = instant - length // 2
    frame = np.zeros(length)
    lo, hi = max(0, start), min(samples.shape[0], start + length)
    frame[lo - start : hi - start] = samples[lo:hi]

    parts = decompose_frame(frame * np.blackman(length), cfg.zero_pad)
    anticausal = parts.anticausal_waveform
    cycle = np.concatenate([anticausal[parts.n_fft - period + 1 :], anticausal[:1]])
    # Flow-derivative convention, negative at closure
    return GlottalCycle(-cycle, period, instant)


def ccd_decompose(
    signal: AudioSignal, gci: GciSequence, pitch: PitchTrack, cfg: CcdConfig | None = None, jobs: int = 1
) -> CcdResult:
    """Anticausal cycle for every GCI.

    Frames whose phase cannot be unwrapped are skipped and listed in the result.

    Args:
        signal: input signal
        gci: closure instants of the signal
        pitch: pitch track of the signal
        cfg: window and zero-padding settings
        jobs: worker threads, the result does not depend on it
    """
    cfg = cfg or CcdConfig()
    if len(gci) < 2:
        logger.warning("Fewer than two GCIs in '%s', no cycle decomposed", signal.source_id)
        return CcdResult()

    def work(index: int):
        period = _local_period(gci, index, pitch)
        if period < 2:
            return None
        try:
            return _decompose_at(signal.samples, int(gci.instants[index]), period, cfg)
        except (UnwrapFailureError, ZeroFrameError) as err:
            logger.debug("Cycle at sample %d skipped: %s", gci.instants[index], err)
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, range(len(gci))))
    else:
        outcomes = [work(i) for i in range(len(gci))]

    result = CcdResult()
    for index, cycle in enumerate(outcomes):
        if cycle is None:
            result.skipped.append(int(gci.instants[index]))
        else:
            result.cycles.append(cycle)
    if result.skipped:
        logger.warning("%d of %d cycles skipped in '%s'", len(result.skipped), len(gci), signal.source_id)
    return result


def find_landmarks(waveform, onset_fraction: float = 0.05) -> Landmarks:
    """Opening, maximum and closing minimum of a cycle.

    Args:
        waveform: one cycle
        onset_fraction: opening threshold above the cycle-start value, in peak-to-peak units
    """
    waveform = np.asarray(waveform, dtype=np.float64)
    steps = np.diff(waveform)
    if waveform.shape[0] < 3 or np.all(steps >= 0) or np.all(steps <= 0):
        raise DegenerateCycleError("cycle is flat or monotone")

    t_max = int(np.argmax(waveform))
    degenerate = t_max >= waveform.shape[0] - 1
    if degenerate:
        t_min = int(np.argmin(waveform))
    else:
        t_min = t_max + 1 + int(np.argmin(waveform[t_max + 1 :]))

    threshold = waveform[0] + onset_fraction * (waveform.max() - waveform.min())
    above = np.flatnonzero(waveform[:t_max] > threshold)
    t_op = int(above[0]) if above.size else t_max
    return Landmarks(t_op, t_max, t_min, degenerate)


def extract_time_constants(cycle: GlottalCycle, onset_fraction: float = 0.05) -> TimeConstants:
    """T1 = (t_min - t_max) / T0 and T2 = (t_min - t_op) / T0, clamped to [0, 1]."""
    if cycle.t0_samples <= 0:
        raise DegenerateCycleError("cycle has no period")
    marks = find_landmarks(cycle.waveform, onset_fraction)
    t1 = float(np.clip((marks.t_min - marks.t_max) / cycle.t0_samples, 0, 1))
    t2 = float(np.clip((marks.t_min - marks.t_op) / cycle.t0_samples, 0, 1))
    return TimeConstants(t1, max(t1, t2), marks.degenerate)


def interpolate_stream(instants_s, values, grid_s) -> np.ndarray:
    """Linear interpolation of instant-valued data onto a time grid, held constant past the edges.

    Args:
        instants_s: increasing times of the values in seconds
        values: one value per instant
        grid_s: output times in seconds
    """
    instants_s = np.asarray(instants_s, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if instants_s.size == 0:
        raise EmptyStreamError("no valued instant to interpolate from")
    return np.interp(np.asarray(grid_s, dtype=np.float64), instants_s, values)


def time_constant_streams(
    cycles, grid_s, sample_rate: int = ANALYSIS_RATE, onset_fraction: float = 0.05
) -> tuple[np.ndarray, np.ndarray]:
    """T1 and T2 of every usable cycle, resampled on the frame grid.

    Degenerate cycles are left out.
    """
    instants, t1, t2 = [], [], []
    for cycle in cycles:
        try:
            constants = extract_time_constants(cycle, onset_fraction)
        except DegenerateCycleError:
            continue
        instants.append(cycle.instant / sample_rate)
        t1.append(constants.t1)
        t2.append(constants.t2)
    return interpolate_stream(instants, t1, grid_s), interpolate_stream(instants, t2, grid_s)


def write_cycles_csv(cycles, path: str, config_hash: str = ""):
    """Debug dump, one row per cycle sample."""
    rows = [
        {"instant": cycle.instant, "offset": offset, "value": value}
        for cycle in cycles
        for offset, value in enumerate(cycle.waveform)
    ]
    table = pd.DataFrame(rows, columns=["instant", "offset", "value"])
    try:
        with open(path, "w", encoding="UTF-8", newline="") as file:
            file.write(f"# config_hash={config_hash}\n")
            table.to_csv(file, index=False, float_format="%.17g")
    except OSError as err:
        raise IoFailureError(f"cannot write '{path}': {err}") from err
