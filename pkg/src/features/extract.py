"""Per-recording analysis pipeline and manifest-driven feature extraction"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor

import pandas as pd

from audio.pitch import estimate_f0
from audio.signal import AudioSignal, WindowKind, load_wav, frame_signal, frame_centers_s
from features.features import FeatureMatrix, Label, assemble_features, spectral_balances
from glottal.decomposition import ccd_decompose, time_constant_streams
from glottal.gci import detect_gci
from spectra.group_delay import SpectrogramKind, compute_spectrograms
from utils.args_config import PipelineConfig
from utils.errors import IoFailureError, EmptyStreamError

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("path", "label", "patient_id")


def analyse_recording(
    signal: AudioSignal,
    label,
    patient_id: str,
    config: PipelineConfig | None = None,
    allow_partial: bool = False,
    jobs: int = 1,
) -> FeatureMatrix:
    """Feature rows of one recording.

    Args:
        signal: recording at the analysis rate
        label: class of the recording
        patient_id: subject identifier
        config: pipeline settings
        allow_partial: keep rows without time constants
        jobs: worker threads inside the recording
    """
    config = config or PipelineConfig()
    framing = config.framing
    frames = frame_signal(signal, framing.frame_ms, framing.hop_ms, WindowKind(framing.window))
    pitch = estimate_f0(signal, framing.frame_ms, framing.hop_ms, config.pitch)
    spectrograms = compute_spectrograms(frames, pitch, config.modgd, config.cgd, framing.n_fft, jobs)

    gci = detect_gci(signal, pitch, config.gci)
    cycles = ccd_decompose(signal, gci, pitch, config.ccd, jobs)
    grid = frame_centers_s(len(frames), signal.sample_rate, framing.frame_ms, framing.hop_ms)
    try:
        time_constants = time_constant_streams(cycles, grid, signal.sample_rate, config.ccd.onset_fraction)
    except EmptyStreamError:
        time_constants = None

    balances = spectral_balances(spectrograms[SpectrogramKind.FM], config.features.band_edges_hz)
    return assemble_features(
        spectrograms,
        time_constants,
        balances,
        label,
        patient_id,
        config.features.delta_norm,
        allow_partial or config.features.allow_partial,
    )


def read_manifest(path: str) -> pd.DataFrame:
    """Manifest rows with audio paths resolved against the manifest directory."""
    try:
        table = pd.read_csv(path, comment="#", dtype=str)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise IoFailureError(f"cannot read manifest '{path}': {err}") from err
    missing = [c for c in MANIFEST_COLUMNS if c not in table.columns]
    if missing:
        raise IoFailureError(f"manifest '{path}' lacks columns {', '.join(missing)}")

    base = os.path.dirname(os.path.abspath(path))
    table["path"] = [p if os.path.isabs(p) else os.path.join(base, p) for p in table["path"]]
    table["label"] = [Label.parse(v) for v in table["label"]]
    return table.loc[:, list(MANIFEST_COLUMNS)]


def _analyse_file(path: str, label, patient_id: str, config: PipelineConfig, allow_partial: bool) -> FeatureMatrix:
    signal = load_wav(path, config.framing.strict_rate, config.framing.sample_rate)
    return analyse_recording(signal, label, patient_id, config, allow_partial)


def extract_dataset(
    manifest_path: str, config: PipelineConfig | None = None, allow_partial: bool = False, jobs: int = 1
) -> FeatureMatrix:
    """Feature table of every recording in a manifest, rows in manifest order.

    Args:
        manifest_path: CSV with path, label and patient_id columns
        config: pipeline settings
        allow_partial: keep rows without time constants
        jobs: worker processes, the result does not depend on it
    """
    config = config or PipelineConfig()
    manifest = read_manifest(manifest_path)
    args = [(row.path, row.label, row.patient_id, config, allow_partial) for row in manifest.itertuples()]
    logger.info("Extracting features of %d recordings", len(args))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            tables = list(pool.map(_analyse_file, *zip(*args)))
    else:
        tables = [_analyse_file(*a) for a in args]

    dataset = FeatureMatrix.concat(tables)
    logger.info("Feature table: %d rows, %d dropped", len(dataset), dataset.dropped)
    return dataset
