"""Analysis/resynthesis round-trip and framing contracts."""

import numpy as np
import pytest

from naestudio.errors import ConfigError, InputError, ShapeError
from naestudio.stft import Spectrogram, StftParams, analyze, hann_window, synthesize


def interior_error(x, y, window):
    sl = slice(window, x.size - window)
    return np.linalg.norm(y[sl] - x[sl]) / np.linalg.norm(x[sl])


class TestStftParams:
    def test_defaults(self):
        p = StftParams()
        assert p.window_size == 2048 and p.hop_size == 512
        assert p.num_bins == 1025

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(window_size=32),  # too small
            dict(window_size=1000),  # not a power of two
            dict(window_size=1024, hop_size=1024),  # no overlap
            dict(window_size=1024, hop_size=768),  # does not divide
            dict(window_size=1024, hop_size=0),
            dict(window_kind="hamming"),
            dict(sample_rate=0),
        ],
    )
    def test_rejects_bad_params(self, kwargs):
        with pytest.raises(ConfigError):
            StftParams(**kwargs)

    def test_frame_count_formula(self):
        # 4096 samples, window 1024, hop 256: (4096-1024)/256 + 1 = 13
        p = StftParams(window_size=1024, hop_size=256, sample_rate=16000)
        assert p.frame_count(4096) == 13
        assert p.frame_count(1024) == 1
        assert p.frame_count(100) == 1
        # a trailing partial frame is kept and zero-padded
        assert p.frame_count(4097) == 14


class TestAnalyze:
    def test_shapes_from_frame_formula(self):
        p = StftParams(window_size=1024, hop_size=256, sample_rate=16000)
        rng = np.random.default_rng(0)
        spec = analyze(rng.standard_normal(4096), p)
        assert spec.magnitudes.shape == (513, 13)
        assert spec.phases.shape == (513, 13)
        assert spec.num_samples == 4096

    def test_zero_signal_gives_zero_magnitudes_and_phases(self):
        p = StftParams(window_size=1024, hop_size=256, sample_rate=16000)
        spec = analyze(np.zeros(16000), p)
        assert np.all(spec.magnitudes == 0.0)
        assert np.all(spec.phases == 0.0)

    def test_bin_centered_sine_peaks_at_its_bin(self):
        p = StftParams(window_size=1024, hop_size=256, sample_rate=16000)
        bin_index = 40
        freq = bin_index * p.sample_rate / p.window_size
        t = np.arange(16000) / p.sample_rate
        spec = analyze(np.sin(2 * np.pi * freq * t), p)
        interior = spec.magnitudes[:, 4:-4]
        assert np.all(interior.argmax(axis=0) == bin_index)

    def test_magnitudes_are_nonnegative(self):
        p = StftParams(window_size=256, hop_size=64, sample_rate=8000)
        rng = np.random.default_rng(1)
        for _ in range(5):
            spec = analyze(rng.standard_normal(3000), p)
            assert np.all(spec.magnitudes >= 0.0)

    def test_rejects_empty_and_non_mono(self):
        p = StftParams(window_size=256, hop_size=64, sample_rate=8000)
        with pytest.raises(InputError):
            analyze(np.array([]), p)
        with pytest.raises(InputError):
            analyze(np.zeros((2, 100)), p)

    def test_complex_linearity(self):
        """The complex STFT of a sum is the sum of the complex STFTs."""
        p = StftParams(window_size=512, hop_size=128, sample_rate=8000)
        rng = np.random.default_rng(2)
        a = rng.standard_normal(4000)
        b = rng.standard_normal(4000)
        ca = analyze(a, p).complex_values()
        cb = analyze(b, p).complex_values()
        cab = analyze(a + b, p).complex_values()
        assert np.abs(cab - (ca + cb)).max() < 1e-9


class TestSynthesize:
    @pytest.mark.parametrize(
        "window,hop", [(2048, 512), (1024, 256), (512, 256), (256, 64)]
    )
    def test_round_trip_interior(self, window, hop):
        p = StftParams(window_size=window, hop_size=hop, sample_rate=16000)
        rng = np.random.default_rng(window + hop)
        x = rng.standard_normal(16384)
        y = synthesize(analyze(x, p))
        assert y.size == x.size
        assert interior_error(x, y, window) < 1e-6

    def test_zero_spectrogram_gives_silence(self):
        p = StftParams(window_size=256, hop_size=64, sample_rate=8000)
        spec = Spectrogram(np.zeros((129, 10)), np.zeros((129, 10)), p)
        assert np.all(synthesize(spec) == 0.0)

    def test_sine_rms_preserved_on_interior(self):
        p = StftParams(window_size=2048, hop_size=512, sample_rate=44100)
        t = np.arange(44100) / 44100
        x = np.sin(2 * np.pi * 440.0 * t)
        y = synthesize(analyze(x, p))
        sl = slice(p.window_size, x.size - p.window_size)
        rms_in = np.sqrt(np.mean(x[sl] ** 2))
        rms_out = np.sqrt(np.mean(y[sl] ** 2))
        assert abs(rms_out - rms_in) / rms_in < 0.01

    def test_shape_mismatch_rejected(self):
        p = StftParams(window_size=256, hop_size=64, sample_rate=8000)
        with pytest.raises(ShapeError):
            Spectrogram(np.zeros((129, 10)), np.zeros((129, 9)), p)

    def test_negative_magnitudes_rejected(self):
        p = StftParams(window_size=256, hop_size=64, sample_rate=8000)
        mags = np.zeros((129, 4))
        mags[3, 2] = -0.5
        with pytest.raises(InputError):
            Spectrogram(mags, np.zeros((129, 4)), p)


def test_hann_window_is_periodic_and_cola():
    w = hann_window(1024)
    assert w[0] == 0.0
    assert abs(w[512] - 1.0) < 1e-12
    # 4x overlap of the periodic Hann sums to a constant
    acc = np.zeros(4096)
    for start in range(0, 4096 - 1024 + 1, 256):
        acc[start : start + 1024] += w
    interior = acc[1024:-1024]
    assert np.abs(interior - interior[0]).max() < 1e-12
