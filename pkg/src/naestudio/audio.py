"""RIFF/WAVE file reading and writing.

Reads 16-bit and 24-bit integer PCM and 32-bit float, downmixing
multichannel files to mono by channel averaging. Writes mono 32-bit float.
Integer samples are scaled by the full negative range (int16 by 1/32768,
int24 by 1/2^23) so that the most negative code maps to exactly -1.0.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError

_FORMAT_PCM = 0x0001
_FORMAT_IEEE_FLOAT = 0x0003


def load_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a WAV file as (mono float64 samples, sample rate)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise FormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise FormatError(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if channels < 1:
        raise FormatError(f"{path}: invalid channel count {channels}")

    if audio_format == _FORMAT_PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _FORMAT_PCM and bits == 24:
        triples = np.frombuffer(data, dtype=np.uint8)
        triples = triples[: (len(triples) // 3) * 3].reshape(-1, 3).astype(np.int32)
        values = triples[:, 0] | (triples[:, 1] << 8) | (triples[:, 2] << 16)
        values = np.where(values >= 1 << 23, values - (1 << 24), values)
        samples = values.astype(np.float64) / float(1 << 23)
    elif audio_format == _FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise FormatError(
            f"{path}: unsupported encoding (format tag {audio_format}, {bits}-bit); "
            "expected 16/24-bit PCM or 32-bit float"
        )

    if channels > 1:
        samples = samples[: (samples.size // channels) * channels]
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, sample_rate


def save_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono samples as 32-bit float PCM.

    Values outside [-1, 1] are written as-is; float WAV has no hard clip.
    """
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise FormatError(f"expected mono 1-D samples, got shape {samples.shape}")
    payload = samples.astype("<f4").tobytes()

    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 4 + 8 + 16 + 8 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<I", 16),
            struct.pack(
                "<HHIIHH",
                _FORMAT_IEEE_FLOAT,
                1,
                sample_rate,
                sample_rate * 4,
                4,
                32,
            ),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
