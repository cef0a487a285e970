"""Reproducible corpus of normophonic and pathological synthetic vowels"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd

from audio.signal import write_wav
from features.features import Label
from synth.vowel import SynthConfig, synth_vowel
from utils.errors import InvalidConfigError, IoFailureError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"
F0_RANGE_HZ = (90.0, 220.0)
OPEN_QUOTIENT_RANGE = (0.5, 0.7)

# Ranges of jitter (%), shimmer (%) and aspiration noise (dB) per class
CLASS_RANGES = {
    Label.NORMOPHONIC: {"jitter_pct": (0.0, 0.5), "shimmer_pct": (0.0, 2.0), "noise_db": (-60.0, -30.0)},
    Label.PATHOLOGICAL: {"jitter_pct": (2.0, 6.0), "shimmer_pct": (5.0, 15.0), "noise_db": (-25.0, -10.0)},
}


def sample_config(label: Label, seed: int, index: int, duration_s: float = 1.0) -> SynthConfig:
    """Vowel parameters of one corpus file, drawn from a stream keyed by (seed, index)."""
    rng = np.random.default_rng([seed, index])
    ranges = CLASS_RANGES[label]
    return SynthConfig(
        f0_hz=float(rng.uniform(*F0_RANGE_HZ)),
        duration_s=duration_s,
        jitter_pct=float(rng.uniform(*ranges["jitter_pct"])),
        shimmer_pct=float(rng.uniform(*ranges["shimmer_pct"])),
        noise_db=float(rng.uniform(*ranges["noise_db"])),
        open_quotient=float(rng.uniform(*OPEN_QUOTIENT_RANGE)),
        seed=int(rng.integers(2**31)),
    )


def _render(config: SynthConfig, wav_path: str, truth_path: str, config_hash: str = ""):
    signal, truth = synth_vowel(config)
    write_wav(signal, wav_path)
    document = {"config_hash": config_hash, **truth.to_dict()}
    try:
        with open(truth_path, "w", encoding="UTF-8") as file:
            json.dump(document, file, indent=1)
            file.write("\n")
    except OSError as err:
        raise IoFailureError(f"cannot write '{truth_path}': {err}") from err


def make_corpus(
    n_normo: int, n_patho: int, seed: int, out_dir: str, duration_s: float = 1.0, jobs: int = 1, config_hash: str = ""
) -> str:
    """Writes WAV files, truth JSON files and a manifest, returns the manifest path.

    Args:
        n_normo: normophonic recordings
        n_patho: pathological recordings
        seed: corpus seed, every file draws from its own (seed, index) stream
        out_dir: output directory, created when missing
        duration_s: length of every recording
        jobs: worker processes, the files do not depend on it
        config_hash: provenance hash written into the manifest and every truth file
    """
    if n_normo < 1 or n_patho < 1:
        raise InvalidConfigError("a corpus needs at least one recording of each class")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as err:
        raise IoFailureError(f"cannot create '{out_dir}': {err}") from err

    plan = [(Label.NORMOPHONIC, "normo", "N", i) for i in range(n_normo)]
    plan += [(Label.PATHOLOGICAL, "patho", "P", i) for i in range(n_patho)]

    rows, tasks = [], []
    for index, (label, prefix, id_prefix, number) in enumerate(plan):
        config = sample_config(label, seed, index, duration_s)
        if config.label != label:
            raise AssertionError(f"sampled configuration of file {index} does not match its class")
        name = f"{prefix}_{number:03d}"
        wav_path, truth_path = os.path.join(out_dir, f"{name}.wav"), os.path.join(out_dir, f"{name}.json")
        tasks.append((config, wav_path, truth_path, config_hash))
        rows.append({"path": f"{name}.wav", "label": label.name.lower(), "patient_id": f"{id_prefix}{number:03d}"})

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_render, *zip(*tasks)))
    else:
        for task in tasks:
            _render(*task)

    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    try:
        with open(manifest_path, "w", encoding="UTF-8", newline="") as file:
            file.write(f"# config_hash={config_hash} seed={seed}\n")
            pd.DataFrame(rows, columns=["path", "label", "patient_id"]).to_csv(file, index=False)
    except OSError as err:
        raise IoFailureError(f"cannot write '{manifest_path}': {err}") from err
    logger.info("Wrote %d recordings to '%s'", len(rows), out_dir)
    return manifest_path
