"""Unit tests for glottal closure detection"""

import numpy as np
import pandas as pd
import pytest
from scipy.signal import lfilter
from audio.pitch import estimate_f0
from audio.signal import AudioSignal
from glottal.gci import GciSequence, lp_residual, detect_gci, write_gci_csv, _select_chain
from synth.vowel import SynthConfig, synth_vowel
from utils.args_config import GciConfig


@pytest.fixture
def vowel():
    """Clean synthetic vowel and its true closure instants."""
    signal, truth = synth_vowel(SynthConfig(f0_hz=120.0, duration_s=1.0, noise_db=-60.0, seed=11))
    return signal, truth.excitation_instants


class TestGciSequence:

    def test_spacing_and_times(self):
        gci = GciSequence(np.array([160, 320, 485]), 16000)
        assert np.array_equal(gci.spacing, [160, 165])
        assert np.allclose(gci.times_s, [0.01, 0.02, 485 / 16000])

    def test_spacing_skips_run_breaks(self):
        gci = GciSequence(np.array([100, 200, 900, 1000]), breaks=[2])
        assert np.array_equal(gci.spacing, [100, 100])
        assert np.array_equal(gci.neighbour_spacing(2), [100])
        assert np.array_equal(gci.neighbour_spacing(1), [100])

    def test_break_must_follow_an_instant(self):
        with pytest.raises(ValueError):
            GciSequence(np.array([100, 200]), breaks=[0])

    def test_must_increase(self):
        with pytest.raises(ValueError):
            GciSequence(np.array([10, 10, 20]))


class TestResidual:

    def test_whitens_an_autoregressive_process(self):
        excitation = np.random.default_rng(2).normal(size=8000)
        signal = AudioSignal(0.1 * lfilter([1.0], [1.0, -1.3, 0.8], excitation))
        residual = lp_residual(signal, GciConfig(lp_order=18))
        assert np.corrcoef(residual[400:-400], excitation[400:-400])[0, 1] > 0.9


class TestSelectChain:

    def test_skips_off_period_candidate(self):
        candidates = np.array([100, 150, 200, 300, 400])
        strength = np.array([3.0, 2.0, 3.0, 3.0, 3.0])
        periods = np.full(5, 100.0)
        chain, breaks = _select_chain(candidates, strength, periods, GciConfig())
        assert np.array_equal(chain, [100, 200, 300, 400])
        assert breaks.size == 0

    def test_bridged_gap_opens_a_new_run(self):
        candidates = np.array([100, 200, 300, 900, 1000, 1100])
        chain, breaks = _select_chain(candidates, np.full(6, 3.0), np.full(6, 100.0), GciConfig())
        assert np.array_equal(chain, candidates)
        assert np.array_equal(breaks, [3])

    def test_spacing_outside_the_voice_range_is_not_linked(self):
        candidates = np.array([100, 400])
        chain, _ = _select_chain(candidates, np.array([3.0, 4.0]), np.full(2, 300.0), GciConfig(), (32, 267))
        assert np.array_equal(chain, [400])


class TestDetectGci:

    def test_finds_true_instants(self, vowel):
        signal, truth = vowel
        gci = detect_gci(signal, estimate_f0(signal))
        inner = truth[(truth > 800) & (truth < len(signal) - 800)]
        distance = np.min(np.abs(inner[:, np.newaxis] - gci.instants[np.newaxis, :]), axis=1)
        assert np.mean(distance <= 5) >= 0.8
        assert abs(len(gci) - len(truth)) <= 0.2 * len(truth)

    def test_detected_instants_are_within_a_quarter_millisecond(self):
        signal, truth = synth_vowel(SynthConfig(f0_hz=100.0, duration_s=1.0, noise_db=-60.0, seed=3))
        gci = detect_gci(signal, estimate_f0(signal))
        detected = gci.instants[(gci.instants > 800) & (gci.instants < len(signal) - 800)]
        distance = np.min(np.abs(detected[:, np.newaxis] - truth.excitation_instants[np.newaxis, :]), axis=1)
        assert detected.size >= 60
        assert np.mean(distance <= 4) >= 0.95

    def test_median_spacing_at_200_hz(self):
        signal, _ = synth_vowel(SynthConfig(f0_hz=200.0, duration_s=1.0, seed=8))
        gci = detect_gci(signal, estimate_f0(signal))
        assert abs(np.median(gci.spacing) - 80) <= 2

    def test_white_noise_gives_few_instants(self):
        signal = AudioSignal(0.1 * np.random.default_rng(5).normal(size=32000))
        gci = detect_gci(signal, estimate_f0(signal))
        assert len(gci) / signal.duration_s < 10

    def test_silent_gap_splits_the_runs(self):
        signal, _ = synth_vowel(SynthConfig(f0_hz=150.0, duration_s=1.5, seed=9))
        samples = signal.samples.copy()
        samples[8000:16000] = 0.0
        gapped = AudioSignal(samples, signal.sample_rate)
        gci = detect_gci(gapped, estimate_f0(gapped))
        assert gci.breaks.size >= 1
        assert np.all((gci.spacing >= 32) & (gci.spacing <= 267))
        assert np.any(gci.instants < 8000) and np.any(gci.instants > 16000)

    def test_silence(self):
        signal = AudioSignal(np.zeros(8000))
        gci = detect_gci(signal, estimate_f0(signal))
        assert len(gci) == 0
        assert gci.no_voiced_content

    def test_write_csv(self, tmp_path):
        path = tmp_path / "gci.csv"
        write_gci_csv(GciSequence(np.array([160, 320])), str(path), "abc123")
        assert path.read_text(encoding="UTF-8").startswith("# config_hash=abc123\n")
        table = pd.read_csv(path, comment="#")
        assert list(table.columns) == ["sample", "time_s"]
        assert table["sample"].tolist() == [160, 320]
