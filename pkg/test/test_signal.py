"""Unit tests for audio ingestion and framing"""

import numpy as np
import pytest
import soundfile as sf
from audio.signal import (
    AudioSignal,
    WindowKind,
    load_wav,
    write_wav,
    analysis_window,
    frame_signal,
    frame_centers_s,
    dft,
    idft,
)
from utils.errors import (
    AudioNotFoundError,
    UnsupportedEncodingError,
    RateMismatchError,
    SignalTooShortError,
    FrameTooLongError,
)


@pytest.fixture
def tone():
    """One second of a 200 Hz tone at 16 kHz."""
    t = np.arange(16000) / 16000
    return AudioSignal(0.5 * np.sin(2 * np.pi * 200 * t), 16000, "tone")


class TestWav:

    def test_round_trip(self, tone, tmp_path):
        path = str(tmp_path / "tone.wav")
        write_wav(tone, path)
        loaded = load_wav(path)
        assert loaded.sample_rate == 16000
        assert len(loaded) == len(tone)
        assert np.allclose(loaded.samples, tone.samples, atol=1e-4)
        assert loaded.source_id == "tone.wav"

    def test_missing_file(self, tmp_path):
        with pytest.raises(AudioNotFoundError):
            load_wav(str(tmp_path / "missing.wav"))

    def test_not_audio(self, tmp_path):
        path = tmp_path / "text.wav"
        path.write_text("not a wave file", encoding="UTF-8")
        with pytest.raises(UnsupportedEncodingError):
            load_wav(str(path))

    def test_resamples_other_rates(self, tmp_path):
        path = str(tmp_path / "low.wav")
        sf.write(path, np.zeros(8000), 8000, subtype="PCM_16")
        assert len(load_wav(path)) == 16000

    def test_strict_rate(self, tmp_path):
        path = str(tmp_path / "low.wav")
        sf.write(path, np.zeros(8000), 8000, subtype="PCM_16")
        with pytest.raises(RateMismatchError):
            load_wav(path, strict_rate=True)

    def test_stereo_is_averaged(self, tmp_path):
        path = str(tmp_path / "stereo.wav")
        sf.write(path, np.column_stack([np.full(1000, 0.5), np.zeros(1000)]), 16000, subtype="FLOAT")
        assert np.allclose(load_wav(path).samples, 0.25)


class TestSignal:

    def test_scaled(self, tone):
        assert np.array_equal(tone.scaled(0.25).samples, tone.samples * 0.25)

    def test_duration(self, tone):
        assert tone.duration_s == pytest.approx(1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            AudioSignal(np.array([0.0, np.nan]))

    def test_samples_are_read_only(self, tone):
        with pytest.raises(ValueError):
            tone.samples[0] = 1.0


class TestFraming:

    def test_frame_count(self, tone):
        frames = frame_signal(tone)
        assert len(frames) == (16000 - 480) // 160 + 1
        assert len(frames[0]) == 480
        assert frames[3].start_sample == 480

    def test_window_applied(self, tone):
        frames = frame_signal(tone, window=WindowKind.BLACKMAN)
        assert frames[0].samples[0] == pytest.approx(0.0, abs=1e-12)

    def test_no_window(self, tone):
        frames = frame_signal(tone, window=WindowKind.NONE)
        assert np.array_equal(frames[1].samples, tone.samples[160:640])

    def test_too_short(self):
        with pytest.raises(SignalTooShortError):
            frame_signal(AudioSignal(np.zeros(100)))

    def test_blackman_shape(self):
        window = analysis_window(101)
        assert window[50] == pytest.approx(1.0)
        assert window[0] == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(window, window[::-1])

    def test_frame_centres(self):
        centres = frame_centers_s(3)
        assert np.allclose(centres, [0.015, 0.025, 0.035])


class TestDft:

    def test_round_trip(self, tone):
        frame = frame_signal(tone)[5]
        spectrum = dft(frame, 1024)
        assert spectrum.bin_hz == pytest.approx(15.625)
        assert np.allclose(idft(spectrum, len(frame)), frame.samples)

    def test_frame_too_long(self):
        with pytest.raises(FrameTooLongError):
            dft(np.ones(600), 512)

    def test_parseval(self, tone):
        frame = frame_signal(tone)[2]
        spectrum = dft(frame, 1024)
        assert np.sum(frame.samples**2) == pytest.approx(np.sum(spectrum.magnitude**2) / 1024, rel=1e-6)

    def test_conjugate_symmetry(self, tone):
        values = dft(frame_signal(tone)[4], 1024).values
        assert np.allclose(values[1:], np.conj(values[1:][::-1]), atol=1e-9)

    def test_cosine_bins(self):
        n = np.arange(1024)
        magnitude = dft(np.cos(2 * np.pi * 125 * n / 16000), 1024).magnitude
        assert set(np.flatnonzero(magnitude > 1e-6)) == {8, 1016}

    def test_framing_is_shift_consistent(self, tone):
        advanced = AudioSignal(tone.samples[160 * 5 :], 16000)
        assert np.array_equal(frame_signal(tone)[5].samples, frame_signal(advanced)[0].samples)
