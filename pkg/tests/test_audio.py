"""WAV reader/writer contracts, including hand-built fixture files."""

import struct

import numpy as np
import pytest

from naestudio.audio import load_wav, save_wav
from naestudio.errors import FormatError, IoError


def build_wav(fmt_tag: int, channels: int, sample_rate: int, bits: int, payload: bytes) -> bytes:
    block_align = channels * bits // 8
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 4 + 8 + 16 + 8 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<I", 16),
            struct.pack(
                "<HHIIHH",
                fmt_tag,
                channels,
                sample_rate,
                sample_rate * block_align,
                block_align,
                bits,
            ),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    return header + payload


def test_float_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    # values representable in 32-bit float survive the file format exactly
    samples = rng.standard_normal(1000).astype(np.float32).astype(np.float64)
    path = tmp_path / "rt.wav"
    save_wav(path, samples, 16000)
    loaded, rate = load_wav(path)
    assert rate == 16000
    assert loaded.dtype == np.float64
    np.testing.assert_array_equal(loaded, samples)


def test_out_of_range_values_written_as_is(tmp_path):
    samples = np.array([-2.5, 0.0, 3.25], dtype=np.float64)
    path = tmp_path / "hot.wav"
    save_wav(path, samples, 8000)
    loaded, _ = load_wav(path)
    np.testing.assert_array_equal(loaded, samples)


def test_16bit_full_scale_square_wave(tmp_path):
    """Integer scaling divides by 32768: -32768 -> -1.0, 32767 -> 32767/32768."""
    codes = np.array([32767, 32767, -32768, -32768] * 2, dtype="<i2")
    path = tmp_path / "square16.wav"
    path.write_bytes(build_wav(1, 1, 8000, 16, codes.tobytes()))
    samples, rate = load_wav(path)
    assert rate == 8000
    assert set(np.unique(samples)) == {-1.0, 32767.0 / 32768.0}


def test_24bit_pcm_scaling(tmp_path):
    values = [0, 1 << 22, -(1 << 23), (1 << 23) - 1]
    payload = b"".join(int(v & 0xFFFFFF).to_bytes(3, "little") for v in values)
    path = tmp_path / "s24.wav"
    path.write_bytes(build_wav(1, 1, 48000, 24, payload))
    samples, _ = load_wav(path)
    expected = np.array(values, dtype=np.float64) / (1 << 23)
    np.testing.assert_array_equal(samples, expected)


def test_stereo_identical_channels_downmix_to_either(tmp_path):
    rng = np.random.default_rng(1)
    mono = rng.standard_normal(64).astype(np.float32)
    interleaved = np.repeat(mono, 2)
    path = tmp_path / "stereo.wav"
    path.write_bytes(build_wav(3, 2, 22050, 32, interleaved.tobytes()))
    samples, _ = load_wav(path)
    np.testing.assert_array_equal(samples, mono.astype(np.float64))


def test_stereo_downmix_averages(tmp_path):
    left = np.array([1.0, 0.0, -1.0], dtype=np.float32)
    right = np.array([0.0, 1.0, 0.0], dtype=np.float32)
    interleaved = np.empty(6, dtype=np.float32)
    interleaved[0::2] = left
    interleaved[1::2] = right
    path = tmp_path / "lr.wav"
    path.write_bytes(build_wav(3, 2, 22050, 32, interleaved.tobytes()))
    samples, _ = load_wav(path)
    np.testing.assert_allclose(samples, (left + right) / 2.0)


def test_unsupported_encodings_rejected(tmp_path):
    path = tmp_path / "bad.wav"
    # 8-bit PCM
    path.write_bytes(build_wav(1, 1, 8000, 8, b"\x00" * 8))
    with pytest.raises(FormatError):
        load_wav(path)
    # mu-law
    path.write_bytes(build_wav(7, 1, 8000, 8, b"\x00" * 8))
    with pytest.raises(FormatError):
        load_wav(path)
    # not RIFF at all
    path.write_bytes(b"OggS" + b"\x00" * 64)
    with pytest.raises(FormatError):
        load_wav(path)


def test_missing_file_raises_io_error(tmp_path):
    with pytest.raises(IoError):
        load_wav(tmp_path / "missing.wav")
