"""Unit tests for the synthetic vowel generator and corpus"""

import json

import numpy as np
import pandas as pd
import pytest
from features.features import Label
from synth.corpus import MANIFEST_NAME, make_corpus, sample_config
from synth.vowel import SynthConfig, synth_vowel, open_phase, PEAK_LEVEL
from utils.errors import InvalidConfigError


@pytest.fixture
def clean():
    return SynthConfig(f0_hz=100.0, duration_s=0.5, seed=1)


class TestSynthConfig:

    def test_defaults_are_normophonic(self):
        assert SynthConfig().label == Label.NORMOPHONIC

    def test_perturbed_is_pathological(self):
        assert SynthConfig(jitter_pct=3.0).label == Label.PATHOLOGICAL
        assert SynthConfig(noise_db=-15.0).label == Label.PATHOLOGICAL

    def test_invalid_values(self):
        with pytest.raises(InvalidConfigError):
            SynthConfig(f0_hz=0.0)
        with pytest.raises(InvalidConfigError):
            SynthConfig(open_quotient=1.0)
        with pytest.raises(InvalidConfigError):
            SynthConfig(formants=((9000.0, 100.0),))


class TestOpenPhase:

    def test_shape(self):
        pulse = open_phase(50)
        assert pulse.shape == (50,)
        assert pulse[-1] == pytest.approx(-1.0)
        assert np.argmax(np.abs(pulse)) == 49


class TestSynthVowel:

    def test_instants_follow_the_period(self, clean):
        signal, truth = synth_vowel(clean)
        assert len(signal) == 8000
        assert truth.excitation_instants[0] == 160
        assert np.all(np.diff(truth.excitation_instants) == 160)
        assert truth.label == Label.NORMOPHONIC

    def test_cycles_match_open_quotient(self, clean):
        _, truth = synth_vowel(clean)
        assert all(len(c) == round(0.6 * 160) for c in truth.glottal_cycles)

    def test_peak_level(self, clean):
        signal, _ = synth_vowel(clean)
        assert np.max(np.abs(signal.samples)) == pytest.approx(PEAK_LEVEL)

    def test_seed_fixes_everything(self):
        config = SynthConfig(jitter_pct=2.0, shimmer_pct=5.0, noise_db=-20.0, seed=5)
        first, _ = synth_vowel(config)
        second, _ = synth_vowel(config)
        other, _ = synth_vowel(SynthConfig(jitter_pct=2.0, shimmer_pct=5.0, noise_db=-20.0, seed=6))
        assert np.array_equal(first.samples, second.samples)
        assert not np.array_equal(first.samples, other.samples)

    def test_jitter_varies_periods(self):
        _, truth = synth_vowel(SynthConfig(jitter_pct=4.0, seed=2))
        assert np.std(np.diff(truth.excitation_instants)) > 1.0

    def test_jitter_sets_the_period_spread(self):
        _, truth = synth_vowel(SynthConfig(f0_hz=100.0, duration_s=2.6, jitter_pct=3.0, seed=12))
        periods = np.diff(truth.excitation_instants)
        assert periods.size >= 200
        assert 100 * np.std(periods, ddof=1) / 160 == pytest.approx(3.0, abs=0.5)

    def test_aspiration_follows_the_formants(self):
        noisy, _ = synth_vowel(SynthConfig(noise_db=-10.0, seed=3))
        spectrum = np.abs(np.fft.rfft(noisy.samples))
        freqs = np.fft.rfftfreq(len(noisy), 1 / noisy.sample_rate)
        assert np.mean(spectrum[(freqs > 500) & (freqs < 900)]) > 100 * np.mean(spectrum[freqs > 6000])

    def test_truth_document(self, clean):
        _, truth = synth_vowel(clean)
        document = truth.to_dict()
        assert document["label"] == "normophonic"
        assert document["excitation_instants"][:2] == [160, 320]
        assert document["config"]["f0_hz"] == 100.0


class TestCorpus:

    def test_sampled_class_matches(self):
        for index in range(10):
            assert sample_config(Label.NORMOPHONIC, 0, index).label == Label.NORMOPHONIC
            assert sample_config(Label.PATHOLOGICAL, 0, index).label == Label.PATHOLOGICAL

    def test_files_and_manifest(self, tmp_path):
        manifest = make_corpus(2, 3, 42, str(tmp_path), duration_s=0.2, config_hash="abc123")
        assert manifest == str(tmp_path / MANIFEST_NAME)
        assert (tmp_path / MANIFEST_NAME).read_text(encoding="UTF-8").startswith("# config_hash=abc123 seed=42\n")
        table = pd.read_csv(manifest, comment="#", dtype=str)
        assert table["path"].tolist() == [
            "normo_000.wav",
            "normo_001.wav",
            "patho_000.wav",
            "patho_001.wav",
            "patho_002.wav",
        ]
        assert table["patient_id"].tolist() == ["N000", "N001", "P000", "P001", "P002"]
        truth = json.loads((tmp_path / "patho_002.json").read_text(encoding="UTF-8"))
        assert truth["label"] == "pathological"
        assert truth["config_hash"] == "abc123"

    def test_same_seed_same_bytes(self, tmp_path):
        make_corpus(1, 1, 7, str(tmp_path / "a"), duration_s=0.2)
        make_corpus(1, 1, 7, str(tmp_path / "b"), duration_s=0.2)
        for name in ("normo_000.wav", "patho_000.wav", "patho_000.json", MANIFEST_NAME):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_needs_both_classes(self, tmp_path):
        with pytest.raises(InvalidConfigError):
            make_corpus(0, 2, 1, str(tmp_path))
