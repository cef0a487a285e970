"""Spectrogram export as CSV tables and 8-bit grayscale images"""

import logging

import numpy as np
from PySide6.QtGui import QImage

from spectra.group_delay import Spectrogram
from utils.errors import IoFailureError

logger = logging.getLogger(__name__)


def to_gray_levels(spec: Spectrogram) -> np.ndarray:
    """Min-max normalized 8-bit image, time on the x-axis and low frequencies at the bottom.

    A constant spectrogram maps to black.
    """
    data = spec.data
    low, high = float(data.min()), float(data.max())
    span = high - low
    scaled = np.zeros_like(data) if span == 0 else (data - low) / span
    levels = np.round(scaled * 255).astype(np.uint8)
    return np.ascontiguousarray(levels.T[::-1])


def write_csv(spec: Spectrogram, path: str, config_hash: str = ""):
    """One row per frame, one column per bin."""
    header = f"config_hash={config_hash} kind={spec.kind.value} hop_ms={spec.hop_ms:g} bin_hz={spec.bin_hz:g}"
    try:
        np.savetxt(path, spec.data, delimiter=",", fmt="%.10g", header=header, comments="# ")
    except OSError as err:
        raise IoFailureError(f"cannot write '{path}': {err}") from err


def write_pgm(spec: Spectrogram, path: str, config_hash: str = ""):
    """Binary (P5) portable graymap with the config hash as a header comment."""
    levels = to_gray_levels(spec)
    height, width = levels.shape
    header = f"P5\n# config_hash={config_hash}\n{width} {height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as file:
            file.write(header + levels.tobytes())
    except OSError as err:
        raise IoFailureError(f"cannot write '{path}': {err}") from err


def write_png(spec: Spectrogram, path: str, config_hash: str = ""):
    """PNG rendered through QImage, the config hash stored as a text chunk."""
    levels = to_gray_levels(spec)
    height, width = levels.shape
    image = QImage(levels.tobytes(), width, height, width, QImage.Format.Format_Grayscale8).copy()
    image.setText("config_hash", config_hash)
    if not image.save(path, "PNG"):
        raise IoFailureError(f"cannot write '{path}'")


def export_spectrogram(spec: Spectrogram, path: str, fmt: str = "csv", config_hash: str = ""):
    """Writes a spectrogram in one of csv, png or pgm.

    Args:
        spec: spectrogram to write
        path: output file
        fmt: output format
        config_hash: provenance hash of the effective config
    """
    writers = {"csv": write_csv, "png": write_png, "pgm": write_pgm}
    if fmt not in writers:
        raise ValueError(f"unknown spectrogram format '{fmt}'")
    writers[fmt](spec, path, config_hash)
    logger.info("Wrote %s spectrogram (%d x %d) to '%s'", spec.kind.name, spec.n_frames, spec.n_bins, path)
