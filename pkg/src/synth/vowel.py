"""Synthetic sustained vowels with known glottal excitation.

The source is written in the flow-derivative domain. Each cycle's open phase is the time reversal of a
truncated damped cosine, which makes it maximum-phase, and ends with the closure peak at the excitation
instant. A first-order low-pass adds the minimum-phase return phase, an all-pole formant cascade shapes
the spectrum and a leaky first difference models lip radiation. Aspiration noise passes through the same
formant cascade before it is mixed in at noise_db below the voiced energy.
"""

import logging
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.signal import lfilter

from audio.signal import AudioSignal, ANALYSIS_RATE
from features.features import Label
from utils.errors import InvalidConfigError

logger = logging.getLogger(__name__)

DEFAULT_FORMANTS = ((700.0, 130.0), (1220.0, 140.0), (2600.0, 160.0))  # /a/
OPEN_PHASE_DECAY = 0.01  # Envelope ratio between the start and the closure end of the open phase
OPEN_PHASE_HALF_PERIOD = 0.4  # Half period of the open-phase oscillation, in open-phase lengths
RETURN_PHASE_POLE = 0.3
RADIATION_ZERO = 0.98
PEAK_LEVEL = 0.9


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic vowel"""

    f0_hz: float = 120.0
    duration_s: float = 1.0
    jitter_pct: float = 0.0  # Std of the period, % of T0
    shimmer_pct: float = 0.0  # Std of the cycle amplitude, %
    noise_db: float = -60.0  # Aspiration noise relative to the voiced signal
    open_quotient: float = 0.6
    formants: tuple = DEFAULT_FORMANTS  # (centre Hz, bandwidth Hz) pairs
    seed: int = 0
    sample_rate: int = ANALYSIS_RATE

    def __post_init__(self):
        object.__setattr__(self, "formants", tuple((float(c), float(b)) for c, b in self.formants))
        if self.f0_hz <= 0 or self.duration_s <= 0:
            raise InvalidConfigError("f0_hz and duration_s must be positive")
        if self.jitter_pct < 0 or self.shimmer_pct < 0:
            raise InvalidConfigError("jitter_pct and shimmer_pct must be >= 0")
        if not 0 < self.open_quotient < 1:
            raise InvalidConfigError("open_quotient must be in (0, 1)")
        if any(not 0 < c < self.sample_rate / 2 or b <= 0 for c, b in self.formants):
            raise InvalidConfigError("formant centres must lie in (0, Nyquist) with positive bandwidths")

    @property
    def label(self) -> Label:
        """Class implied by the perturbation levels."""
        normal = self.jitter_pct < 1 and self.shimmer_pct < 3 and self.noise_db < -25
        return Label.NORMOPHONIC if normal else Label.PATHOLOGICAL


@dataclass
class SynthTruth:
    """Construction-level ground truth of a synthetic vowel"""

    excitation_instants: np.ndarray
    glottal_cycles: list = field(default_factory=list)  # Open-phase waveforms, each ending at its instant
    label: Label = Label.NORMOPHONIC
    config: SynthConfig | None = None

    def to_dict(self) -> dict:
        """JSON-ready document."""
        return {
            "label": self.label.name.lower(),
            "config": asdict(self.config) if self.config else None,
            "excitation_instants": [int(i) for i in self.excitation_instants],
            "glottal_cycles": [np.round(c, 12).tolist() for c in self.glottal_cycles],
        }


def open_phase(length: int) -> np.ndarray:
    """Maximum-phase open-phase pulse of the given length, -1 at its last sample."""
    k = np.arange(length)
    decay = OPEN_PHASE_DECAY ** (1.0 / length)
    omega = np.pi / (OPEN_PHASE_HALF_PERIOD * length)
    return -(decay**k * np.cos(omega * k))[::-1]


def formant_filter(signal: np.ndarray, formants, sample_rate: int = ANALYSIS_RATE) -> np.ndarray:
    """Cascade of unity-DC-gain two-pole resonators."""
    out = signal
    for centre, bandwidth in formants:
        radius = np.exp(-np.pi * bandwidth / sample_rate)
        theta = 2 * np.pi * centre / sample_rate
        denominator = np.array([1.0, -2 * radius * np.cos(theta), radius**2])
        out = lfilter([denominator.sum()], denominator, out)
    return out


def synth_vowel(config: SynthConfig) -> tuple[AudioSignal, SynthTruth]:
    """Renders a vowel and its ground truth.

    Args:
        config: vowel parameters, the seed fixes every random draw
    """
    rng = np.random.default_rng(config.seed)
    rate = config.sample_rate
    n_samples = int(round(config.duration_s * rate))
    t0 = rate / config.f0_hz

    excitation = np.zeros(n_samples)
    instants, cycles = [], []
    period = int(round(t0))
    instant = period
    while instant < n_samples:
        amplitude = 1.0
        if config.shimmer_pct > 0:
            amplitude = max(0.0, 1.0 + rng.normal(0.0, config.shimmer_pct / 100))
        pulse = amplitude * open_phase(max(2, int(round(config.open_quotient * period))))
        start = instant - pulse.shape[0] + 1
        excitation[start : instant + 1] += pulse
        instants.append(instant)
        cycles.append(pulse)

        period = t0
        if config.jitter_pct > 0:
            period = np.clip(t0 + rng.normal(0.0, config.jitter_pct * t0 / 100), 0.5 * t0, 1.5 * t0)
        period = int(round(period))
        instant += period

    source = lfilter([1.0], [1.0, -RETURN_PHASE_POLE], excitation)
    voiced = formant_filter(source, config.formants, rate)

    aspiration = formant_filter(rng.normal(0.0, 1.0, n_samples), config.formants, rate)
    aspiration *= np.sqrt(np.mean(voiced**2) / np.mean(aspiration**2)) * 10 ** (config.noise_db / 20)
    speech = lfilter([1.0, -RADIATION_ZERO], [1.0], voiced + aspiration)

    peak = np.max(np.abs(speech))
    if peak > 0:
        speech = speech * PEAK_LEVEL / peak

    truth = SynthTruth(np.array(instants, dtype=np.int64), cycles, config.label, config)
    logger.debug("Synthesized %d cycles at %.1f Hz (%s)", len(instants), config.f0_hz, truth.label.name)
    return AudioSignal(speech, rate, source_id=f"synth-{config.seed}"), truth
