"""Unit tests for the complex cepstrum decomposition and time constants"""

import numpy as np
import pandas as pd
import pytest
from audio.pitch import estimate_f0
from glottal.decomposition import (
    GlottalCycle,
    complex_cepstrum,
    decompose_frame,
    ccd_decompose,
    find_landmarks,
    extract_time_constants,
    interpolate_stream,
    time_constant_streams,
    write_cycles_csv,
)
from glottal.gci import GciSequence
from synth.vowel import SynthConfig, synth_vowel, open_phase
from utils.errors import ZeroFrameError, DegenerateCycleError, EmptyStreamError


@pytest.fixture
def decaying():
    """Minimum-phase truncated exponential."""
    return 0.9 ** np.arange(64)


@pytest.fixture
def mixed():
    """Anticausal 0.8^-n (n <= 0) convolved with causal 0.9^n."""
    anticausal = 0.8 ** np.arange(16)[::-1]
    return anticausal, np.convolve(anticausal, 0.9 ** np.arange(32))


@pytest.fixture
def triangle():
    """Cycle with opening at 4, maximum at 14 and closing minimum at 19."""
    waveform = np.zeros(25)
    waveform[4:15] = np.linspace(0.3, 1.0, 11)
    waveform[15:20] = np.linspace(0.6, -1.0, 5)
    waveform[20:] = np.linspace(-0.6, -0.1, 5)
    return GlottalCycle(waveform, 25, instant=1600)


class TestComplexCepstrum:

    def test_zero_sequence(self):
        with pytest.raises(ZeroFrameError):
            complex_cepstrum(np.zeros(8), 16)

    def test_negative_dc_is_normalized(self, decaying):
        _, sign, _ = complex_cepstrum(-decaying, 1024)
        assert sign == -1.0


class TestDecomposeFrame:

    def test_minimum_phase_is_causal(self, decaying):
        assert decompose_frame(decaying).anticausal_energy_ratio < 1e-3

    def test_maximum_phase_is_anticausal(self, decaying):
        assert decompose_frame(decaying[::-1]).anticausal_energy_ratio > 1 - 1e-3

    def test_reconstruction(self, mixed):
        _, frame = mixed
        parts = decompose_frame(frame)
        expected = np.fft.fft(frame, parts.n_fft)
        assert np.allclose(parts.reconstructed_spectrum(), expected, rtol=1e-6, atol=1e-9)

    def test_recovers_the_anticausal_factor(self, mixed):
        anticausal, frame = mixed
        waveform = decompose_frame(frame).anticausal_waveform
        recovered = np.concatenate([waveform[-15:], waveform[:1]])
        assert np.allclose(recovered, anticausal, atol=1e-6)
        assert np.allclose(waveform[1:-15], 0.0, atol=1e-6)

    def test_causal_part_starts_at_one(self, mixed):
        _, frame = mixed
        causal = decompose_frame(frame).causal_waveform
        assert causal[0] == pytest.approx(1.0)
        assert np.allclose(causal[:32], 0.9 ** np.arange(32), atol=1e-6)

    def test_open_phase_pulse_is_maximum_phase(self):
        assert decompose_frame(open_phase(96)).anticausal_energy_ratio > 1 - 1e-4


class TestLandmarks:

    def test_triangle(self, triangle):
        marks = find_landmarks(triangle.waveform)
        assert (marks.t_op, marks.t_max, marks.t_min) == (4, 14, 19)
        assert not marks.degenerate

    def test_time_constants(self, triangle):
        constants = extract_time_constants(triangle)
        assert constants.t1 == pytest.approx(0.2)
        assert constants.t2 == pytest.approx(0.6)

    def test_linear_rise_and_fall(self):
        waveform = np.zeros(100)
        waveform[:61] = np.linspace(0.0, 1.0, 61)
        waveform[60:81] = np.linspace(1.0, 0.0, 21)
        constants = extract_time_constants(GlottalCycle(waveform, 100))
        assert constants.t1 == pytest.approx(0.20, abs=0.02)
        assert constants.t2 == pytest.approx(0.77, abs=0.02)

    def test_monotone(self):
        with pytest.raises(DegenerateCycleError):
            find_landmarks(np.linspace(0, 1, 10))

    def test_flat(self):
        with pytest.raises(DegenerateCycleError):
            find_landmarks(np.zeros(10))

    def test_too_short(self):
        with pytest.raises(DegenerateCycleError):
            find_landmarks(np.array([0.0, 1.0]))

    def test_maximum_at_the_end(self):
        constants = extract_time_constants(GlottalCycle(np.array([0.0, -1.0, 0.5, 1.0]), 4))
        assert constants.degenerate
        assert 0 <= constants.t1 <= constants.t2 <= 1

    def test_cycle_length_must_match_period(self):
        with pytest.raises(ValueError):
            GlottalCycle(np.zeros(10), 12)


class TestStreams:

    def test_interpolation(self):
        assert np.allclose(interpolate_stream([0.1, 0.2], [1.0, 3.0], [0.0, 0.15, 0.3]), [1.0, 2.0, 3.0])

    def test_empty_stream(self):
        with pytest.raises(EmptyStreamError):
            interpolate_stream([], [], [0.0])

    def test_degenerate_cycles_are_left_out(self, triangle):
        monotone = GlottalCycle(np.linspace(0, 1, 25), 25, instant=3200)
        t1, t2 = time_constant_streams([triangle, monotone], np.array([0.05, 0.1, 0.2]))
        assert np.allclose(t1, 0.2)
        assert np.allclose(t2, 0.6)

    def test_write_cycles(self, triangle, tmp_path):
        path = tmp_path / "cycles.csv"
        write_cycles_csv([triangle], str(path), "abc123")
        table = pd.read_csv(path, comment="#")
        assert len(table) == 25
        assert set(table["instant"]) == {1600}


class TestCcdDecompose:

    def test_periodic_vowel(self):
        signal, truth = synth_vowel(SynthConfig(f0_hz=100.0, duration_s=1.0, noise_db=-120.0, seed=4))
        gci = GciSequence(truth.excitation_instants, signal.sample_rate)
        result = ccd_decompose(signal, gci, estimate_f0(signal))
        assert len(result) + len(result.skipped) == len(gci)

        middle = [c for c in result if 3200 <= c.instant <= 12800]
        assert len(middle) >= 50
        assert all(abs(c.t0_samples - 160) <= 2 for c in middle)
        constants = [extract_time_constants(c) for c in middle]
        assert np.ptp([c.t1 for c in constants]) < 0.05
        assert np.ptp([c.t2 for c in constants]) < 0.05

    def test_too_few_instants(self):
        signal, _ = synth_vowel(SynthConfig(duration_s=0.2))
        result = ccd_decompose(signal, GciSequence(np.array([800])), estimate_f0(signal))
        assert len(result) == 0

    def test_threads_do_not_change_cycles(self):
        signal, truth = synth_vowel(SynthConfig(f0_hz=140.0, duration_s=0.3, seed=2))
        gci = GciSequence(truth.excitation_instants, signal.sample_rate)
        pitch = estimate_f0(signal)
        serial = ccd_decompose(signal, gci, pitch, jobs=1)
        threaded = ccd_decompose(signal, gci, pitch, jobs=3)
        assert [c.instant for c in serial] == [c.instant for c in threaded]
        assert all(np.array_equal(a.waveform, b.waveform) for a, b in zip(serial, threaded))

    def test_cycles_match_the_open_phase(self):
        signal, truth = synth_vowel(SynthConfig(f0_hz=100.0, duration_s=1.0, noise_db=-60.0, seed=6))
        gci = GciSequence(truth.excitation_instants, signal.sample_rate)
        result = ccd_decompose(signal, gci, estimate_f0(signal))
        pulses = dict(zip(truth.excitation_instants.tolist(), truth.glottal_cycles))

        scores = []
        for cycle in result:
            if not 320 <= cycle.instant <= len(signal) - 320:
                continue
            reference = np.zeros(cycle.t0_samples)
            pulse = pulses[cycle.instant][-cycle.t0_samples :]
            reference[-pulse.shape[0] :] = pulse
            scores.append(max(np.corrcoef(np.roll(cycle.waveform, lag), reference)[0, 1] for lag in range(-3, 4)))
        assert len(scores) >= 80
        assert np.mean(np.array(scores) >= 0.95) >= 0.9

    def test_noise_makes_time_constants_erratic(self):
        def t1_spread(noise_db):
            signal, truth = synth_vowel(SynthConfig(f0_hz=120.0, duration_s=1.0, noise_db=noise_db, seed=10))
            gci = GciSequence(truth.excitation_instants, signal.sample_rate)
            values = []
            for cycle in ccd_decompose(signal, gci, estimate_f0(signal)):
                try:
                    values.append(extract_time_constants(cycle).t1)
                except DegenerateCycleError:
                    continue
            assert len(values) >= 20
            return np.std(values)

        clean = t1_spread(-60.0)
        assert clean < 0.05
        assert t1_spread(-5.0) > clean
