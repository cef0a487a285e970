"""Frame-level feature streams and the feature table"""

import logging
from dataclasses import dataclass, astuple
from enum import IntEnum

import numpy as np
import pandas as pd

from spectra.group_delay import Spectrogram, SpectrogramKind
from utils.errors import (
    TooFewFramesError,
    WrongKindError,
    EmptyAfterAlignmentError,
    IoFailureError,
    EmptyInputError,
)

logger = logging.getLogger(__name__)

DELTA_EPS = 1e-12
FEATURE_NAMES = ("dFM", "dSMOOTH", "dMODGD", "dPPGD", "dCGD", "T1", "T2", "BAL1", "BAL2", "BAL3")
DELTA_KINDS = (
    SpectrogramKind.FM,
    SpectrogramKind.SMOOTH,
    SpectrogramKind.MODGD,
    SpectrogramKind.PPGD,
    SpectrogramKind.CGD,
)
ID_COLUMNS = ("patient_id", "label", "frame_idx")


class Label(IntEnum):
    """Voice class of a recording."""

    NORMOPHONIC = 0
    PATHOLOGICAL = 1

    @classmethod
    def parse(cls, value):
        """Accepts a Label, its name in any case, or 0/1."""
        if isinstance(value, cls):
            return value
        text = str(value).strip()
        if text.isdigit():
            return cls(int(text))
        try:
            return cls[text.upper()]
        except KeyError as err:
            raise ValueError(f"unknown label '{value}'") from err


@dataclass(frozen=True)
class FeatureFrame:
    """The ten features of one 10 ms frame."""

    d_fm: float
    d_smooth: float
    d_modgd: float
    d_ppgd: float
    d_cgd: float
    t1: float
    t2: float
    bal1: float
    bal2: float
    bal3: float

    def as_array(self) -> np.ndarray:
        """Values in FEATURE_NAMES order."""
        return np.array(astuple(self), dtype=np.float64)


def spectrogram_delta(spec: Spectrogram, norm: str = "l2") -> np.ndarray:
    """Relative change between consecutive frames, d_t = |s_t - s_t-1| / (|s_t-1| + eps).

    The first frame copies the second value so the stream has one value per frame.

    Args:
        spec: any spectrogram
        norm: "l2" or "l1"
    """
    if spec.n_frames < 2:
        raise TooFewFramesError(f"delta needs two frames, got {spec.n_frames}")
    order = 2 if norm == "l2" else 1
    rows = spec.data
    change = np.linalg.norm(rows[1:] - rows[:-1], ord=order, axis=1)
    reference = np.linalg.norm(rows[:-1], ord=order, axis=1)
    deltas = change / (reference + DELTA_EPS)
    return np.concatenate([deltas[:1], deltas])


def spectral_balances(fm: Spectrogram, band_edges_hz=(0.0, 1000.0, 4000.0, 8000.0)) -> np.ndarray:
    """Share of each frame's power in three bands, [n_frames x 3].

    Bands are half-open [lo, hi), so the Nyquist bin of a 16 kHz analysis is left out. Silent
    frames get equal shares.

    Args:
        fm: FM spectrogram
        band_edges_hz: four increasing band edges
    """
    if fm.kind != SpectrogramKind.FM:
        raise WrongKindError(f"balances need an FM spectrogram, got {fm.kind.name}")
    freqs = np.arange(fm.n_bins) * fm.bin_hz
    power = fm.data**2
    energies = np.stack(
        [power[:, (freqs >= lo) & (freqs < hi)].sum(axis=1) for lo, hi in zip(band_edges_hz[:-1], band_edges_hz[1:])],
        axis=1,
    )
    total = energies.sum(axis=1, keepdims=True)
    balances = np.full_like(energies, 1.0 / energies.shape[1])
    np.divide(energies, total, out=balances, where=total > 0)
    return balances


class FeatureMatrix:
    """Feature rows of one or more recordings with their labels and patient ids."""

    def __init__(self, values, labels, patient_ids, frame_idx=None, names=FEATURE_NAMES, dropped: int = 0):
        """Validates and stores the table.

        Args:
            values: [n_rows x n_features] matrix, NaN marks a missing value
            labels: per-row Label
            patient_ids: per-row subject identifier
            frame_idx: per-row frame index within its recording
            names: feature names, one per column
            dropped: rows discarded while building the table
        """
        self.values = np.asarray(values, dtype=np.float64).reshape(-1, len(names))
        self.labels = np.asarray([int(Label.parse(v)) for v in labels], dtype=np.int64)
        self.patient_ids = np.asarray([str(p) for p in patient_ids], dtype=object)
        n = self.values.shape[0]
        self.frame_idx = np.arange(n) if frame_idx is None else np.asarray(frame_idx, dtype=np.int64)
        self.names = tuple(names)
        self.dropped = dropped

        if not self.labels.shape[0] == self.patient_ids.shape[0] == self.frame_idx.shape[0] == n:
            raise ValueError("values, labels, patient ids and frame indices must have the same length")
        for patient in self.patients():
            if np.unique(self.labels[self.patient_ids == patient]).shape[0] > 1:
                raise ValueError(f"patient '{patient}' has frames with different labels")

    def __len__(self):
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        """Values of one feature."""
        return self.values[:, self.names.index(name)]

    def row(self, index: int) -> FeatureFrame:
        """One row as a FeatureFrame, the table must hold the ten standard features."""
        if self.names != FEATURE_NAMES:
            raise ValueError("row() needs the full feature set")
        return FeatureFrame(*self.values[index])

    def patients(self) -> list:
        """Patient ids in order of first appearance."""
        _, first = np.unique(self.patient_ids, return_index=True)
        return [self.patient_ids[i] for i in sorted(first)]

    def patient_labels(self) -> dict:
        """Label of every patient."""
        return {p: Label(int(self.labels[np.argmax(self.patient_ids == p)])) for p in self.patients()}

    def select(self, names) -> "FeatureMatrix":
        """Table restricted to some features, rows with missing values among them dropped."""
        names = tuple(names)
        unknown = [n for n in names if n not in self.names]
        if unknown:
            raise ValueError(f"unknown features: {', '.join(unknown)}")
        columns = [self.names.index(n) for n in names]
        values = self.values[:, columns]
        keep = np.all(np.isfinite(values), axis=1)
        if not np.all(keep):
            logger.info("Selection of %s drops %d incomplete rows", ",".join(names), int((~keep).sum()))
        return FeatureMatrix(
            values[keep], self.labels[keep], self.patient_ids[keep], self.frame_idx[keep], names, int((~keep).sum())
        )

    def subset_rows(self, mask) -> "FeatureMatrix":
        """Rows where mask is true."""
        mask = np.asarray(mask, dtype=bool)
        return FeatureMatrix(
            self.values[mask], self.labels[mask], self.patient_ids[mask], self.frame_idx[mask], self.names
        )

    @classmethod
    def concat(cls, matrices) -> "FeatureMatrix":
        """Stacks tables with identical columns, patient ids kept per row."""
        matrices = list(matrices)
        if not matrices:
            raise EmptyInputError("no feature table to concatenate")
        names = matrices[0].names
        return cls(
            np.concatenate([m.values for m in matrices]),
            np.concatenate([m.labels for m in matrices]),
            np.concatenate([m.patient_ids for m in matrices]),
            np.concatenate([m.frame_idx for m in matrices]),
            names,
            sum(m.dropped for m in matrices),
        )

    def to_frame(self) -> pd.DataFrame:
        """Table as a DataFrame with the CSV column layout."""
        table = pd.DataFrame(
            {
                "patient_id": self.patient_ids,
                "label": [Label(v).name.lower() for v in self.labels],
                "frame_idx": self.frame_idx,
            }
        )
        for i, name in enumerate(self.names):
            table[name] = self.values[:, i]
        return table

    def write_csv(self, path: str, config_hash: str = ""):
        """Writes the table with a config hash comment line."""
        try:
            with open(path, "w", encoding="UTF-8", newline="") as file:
                file.write(f"# config_hash={config_hash}\n")
                self.to_frame().to_csv(file, index=False, float_format="%.17g")
        except OSError as err:
            raise IoFailureError(f"cannot write '{path}': {err}") from err

    @classmethod
    def read_csv(cls, path: str) -> "FeatureMatrix":
        """Reads a table written by write_csv."""
        try:
            table = pd.read_csv(path, comment="#", dtype={"patient_id": str})
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
            raise IoFailureError(f"cannot read feature table '{path}': {err}") from err
        missing = [c for c in ID_COLUMNS if c not in table.columns]
        if missing:
            raise IoFailureError(f"'{path}' lacks columns {', '.join(missing)}")
        names = [c for c in table.columns if c not in ID_COLUMNS]
        return cls(
            table[names].to_numpy(dtype=np.float64),
            table["label"].tolist(),
            table["patient_id"].tolist(),
            table["frame_idx"].to_numpy(),
            names,
        )


def assemble_features(
    spectrograms: dict,
    time_constants,
    balances: np.ndarray,
    label,
    patient_id: str,
    delta_norm: str = "l2",
    allow_partial: bool = False,
) -> FeatureMatrix:
    """Aligns every stream of one recording on the frame grid.

    Args:
        spectrograms: the five spectrograms by kind, same frame grid
        time_constants: (T1, T2) streams on the frame grid, None when no cycle was usable
        balances: [n_frames x 3] band shares
        label: recording class
        patient_id: subject identifier
        delta_norm: norm used by the deltas
        allow_partial: keep rows without time constants (stored as NaN)
    """
    deltas = [spectrogram_delta(spectrograms[kind], delta_norm) for kind in DELTA_KINDS]
    n_frames = deltas[0].shape[0]
    if any(d.shape[0] != n_frames for d in deltas) or balances.shape[0] != n_frames:
        raise ValueError("streams are not on the same frame grid")

    if time_constants is None:
        if not allow_partial:
            raise EmptyAfterAlignmentError(f"no time constants for patient '{patient_id}'")
        logger.warning("Patient '%s' has no usable glottal cycle, T1/T2 left empty", patient_id)
        time_constants = (np.full(n_frames, np.nan), np.full(n_frames, np.nan))

    values = np.column_stack(deltas + list(time_constants) + [balances])
    required = values if not allow_partial else np.delete(values, [5, 6], axis=1)
    keep = np.all(np.isfinite(required), axis=1)
    dropped = int((~keep).sum())
    if not np.any(keep):
        raise EmptyAfterAlignmentError(f"no complete feature row for patient '{patient_id}'")
    if dropped:
        logger.warning("Dropped %d of %d rows for patient '%s'", dropped, n_frames, patient_id)

    frame_idx = np.flatnonzero(keep)
    logger.debug("Patient '%s': %d feature rows", patient_id, frame_idx.shape[0])
    return FeatureMatrix(
        values[keep],
        [Label.parse(label)] * frame_idx.shape[0],
        [patient_id] * frame_idx.shape[0],
        frame_idx,
        FEATURE_NAMES,
        dropped,
    )

