"""Pipeline configuration shared by the CLI and every analysis module."""

import hashlib
import json
from dataclasses import dataclass, field, fields, asdict

import yaml

from utils.errors import InvalidConfigError


def _require(condition: bool, message: str):
    """Raise InvalidConfigError with message if condition does not hold."""
    if not condition:
        raise InvalidConfigError(message)


@dataclass(frozen=True)
class FramingConfig:
    """Framing and DFT settings"""

    sample_rate: int = 16000  # Analysis rate, every input is brought to this rate
    frame_ms: float = 30.0
    hop_ms: float = 10.0
    n_fft: int = 1024
    window: str = "blackman"
    strict_rate: bool = False  # Reject other rates instead of resampling

    def __post_init__(self):
        _require(self.sample_rate > 0, "sample_rate must be positive")
        _require(0 < self.hop_ms <= self.frame_ms, "hop_ms must be in (0, frame_ms]")
        _require(self.window in ("blackman", "none"), f"unknown window '{self.window}'")
        _require(self.n_fft >= self.frame_len, "n_fft must hold one frame")

    @property
    def frame_len(self) -> int:
        """Frame length in samples."""
        return int(round(self.sample_rate * self.frame_ms / 1000))

    @property
    def hop_len(self) -> int:
        """Hop in samples."""
        return int(round(self.sample_rate * self.hop_ms / 1000))


@dataclass(frozen=True)
class PitchConfig:
    """Autocorrelation pitch tracker settings"""

    f0_min: float = 60.0
    f0_max: float = 500.0
    voicing_threshold: float = 0.3  # Normalized autocorrelation peak needed to call a frame voiced
    median_len: int = 5

    def __post_init__(self):
        _require(0 < self.f0_min < self.f0_max, "need 0 < f0_min < f0_max")
        _require(self.median_len % 2 == 1, "median_len must be odd")


@dataclass(frozen=True)
class ModGdConfig:
    """Modified group delay parameters"""

    alpha: float = 0.4  # Output compression exponent
    gamma: float = 0.9  # Exponent on the smoothed magnitude
    lifter_len: int = 8  # Quefrency bins kept for the cepstral smoothing

    def __post_init__(self):
        _require(0 < self.alpha <= 1, "alpha must be in (0, 1]")
        _require(0 < self.gamma <= 1, "gamma must be in (0, 1]")
        _require(self.lifter_len >= 1, "lifter_len must be >= 1")


@dataclass(frozen=True)
class CgdConfig:
    """Chirp group delay parameters"""

    rho: float = 1.12  # Radius of the analysis circle

    def __post_init__(self):
        _require(self.rho > 1, "rho must be > 1")


@dataclass(frozen=True)
class GciConfig:
    """Glottal closure detection settings"""

    lp_order: int = 18
    lp_frame_ms: float = 25.0
    period_tolerance: float = 0.3  # Allowed deviation of GCI spacing from the local T0
    min_strength: float = 1.5  # Candidate peak height in local RMS units
    spacing_penalty: float = 2.0
    restart_penalty: float = 5.0  # Cost of bridging an unvoiced gap

    def __post_init__(self):
        _require(self.lp_order >= 1, "lp_order must be >= 1")
        _require(0 < self.period_tolerance < 1, "period_tolerance must be in (0, 1)")


@dataclass(frozen=True)
class CcdConfig:
    """Complex cepstrum decomposition settings"""

    window_periods: float = 2.0  # Window length in pitch periods
    zero_pad: int = 8  # FFT oversampling used for phase unwrapping
    onset_fraction: float = 0.05  # Opening threshold in peak-to-peak units

    def __post_init__(self):
        _require(self.window_periods > 0, "window_periods must be positive")
        _require(self.zero_pad >= 1, "zero_pad must be >= 1")


@dataclass(frozen=True)
class FeatureConfig:
    """Feature assembly settings"""

    band_edges_hz: tuple = (0.0, 1000.0, 4000.0, 8000.0)
    delta_norm: str = "l2"
    allow_partial: bool = False

    def __post_init__(self):
        object.__setattr__(self, "band_edges_hz", tuple(float(e) for e in self.band_edges_hz))
        _require(len(self.band_edges_hz) == 4, "three balance bands need four edges")
        _require(all(a < b for a, b in zip(self.band_edges_hz, self.band_edges_hz[1:])), "band edges must increase")
        _require(self.delta_norm in ("l1", "l2"), f"unknown delta norm '{self.delta_norm}'")


@dataclass(frozen=True)
class MiConfig:
    """Mutual information estimator settings"""

    n_bins: int = 50

    def __post_init__(self):
        _require(self.n_bins >= 1, "n_bins must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    """MLP training settings"""

    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    l2_penalty: float = 0.0
    hidden_units: int = 16
    class_weighting: bool = False  # Inverse-frequency sample weights

    def __post_init__(self):
        _require(self.learning_rate > 0, "learning_rate must be positive")
        _require(self.epochs >= 1, "epochs must be >= 1")
        _require(self.batch_size >= 1, "batch_size must be >= 1")
        _require(self.hidden_units >= 1, "hidden_units must be >= 1")
        _require(self.l2_penalty >= 0, "l2_penalty must be >= 0")


@dataclass(frozen=True)
class DecisionConfig:
    """Evaluation settings"""

    frame_threshold: float = 0.5
    k_folds: int = 10
    roc_points: int = 101

    def __post_init__(self):
        _require(0 <= self.frame_threshold <= 1, "frame_threshold must be in [0, 1]")
        _require(self.k_folds >= 2, "k_folds must be >= 2")
        _require(self.roc_points >= 2, "roc_points must be >= 2")


@dataclass(frozen=True)
class PipelineConfig:
    """Every module default in one declarative document"""

    framing: FramingConfig = field(default_factory=FramingConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    modgd: ModGdConfig = field(default_factory=ModGdConfig)
    cgd: CgdConfig = field(default_factory=CgdConfig)
    gci: GciConfig = field(default_factory=GciConfig)
    ccd: CcdConfig = field(default_factory=CcdConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    mi: MiConfig = field(default_factory=MiConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)

    @classmethod
    def from_dict(cls, document: dict | None):
        """Builds a config from a nested mapping, rejecting unknown keys.

        Args:
            document: mapping of section name to mapping of field name to value
        """
        document = document or {}
        if not isinstance(document, dict):
            raise InvalidConfigError("config document must be a mapping")

        sections = {f.name: f for f in fields(cls)}
        kwargs = {}
        for name, values in document.items():
            if name not in sections:
                raise InvalidConfigError(f"unknown config section '{name}'")
            section_type = sections[name].default_factory
            known = {f.name for f in fields(section_type)}
            values = values or {}
            unknown = set(values) - known
            if unknown:
                raise InvalidConfigError(f"unknown keys in '{name}': {', '.join(sorted(unknown))}")
            try:
                kwargs[name] = section_type(**values)
            except TypeError as err:
                raise InvalidConfigError(f"bad value in '{name}': {err}") from err
        return cls(**kwargs)

    @classmethod
    def from_yaml(cls, path: str):
        """Loads a config document from a YAML file."""
        try:
            with open(path, "r", encoding="UTF-8") as file:
                document = yaml.safe_load(file)
        except FileNotFoundError as err:
            raise InvalidConfigError(f"config file '{path}' not found") from err
        except yaml.YAMLError as err:
            raise InvalidConfigError(f"config file '{path}' is not valid YAML: {err}") from err
        return cls.from_dict(document)

    def to_dict(self) -> dict:
        """Plain nested dictionary of the effective config."""
        document = asdict(self)
        document["features"]["band_edges_hz"] = list(self.features.band_edges_hz)
        return document

    def config_hash(self) -> str:
        """Stable short hash of the effective config, embedded into artifacts."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("UTF-8")).hexdigest()[:16]
