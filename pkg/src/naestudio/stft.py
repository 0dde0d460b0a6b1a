"""Time-frequency front-end: STFT analysis and weighted overlap-add resynthesis.

All downstream processing consumes the magnitude/phase split produced here.
Everything runs in float64; functions are pure and share no state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, InputError, ShapeError

# Overlap-add weights below this value are treated as zero (samples there are
# unrecoverable because the analysis window annihilated them).
_WEIGHT_FLOOR = 1e-12

# Normalization weights are floored at this fraction of their peak so that the
# edge taper attenuates instead of amplifying: without it, masked (STFT-
# inconsistent) spectrograms blow up at the first/last window where the
# accumulated squared window approaches zero.
_RELATIVE_WEIGHT_FLOOR = 1e-2


def hann_window(size: int) -> np.ndarray:
    """Periodic Hann window of the given length."""
    n = np.arange(size, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)


@dataclass(frozen=True)
class StftParams:
    """Framing parameters for analysis and resynthesis.

    The hop must divide the window and leave at least 2x overlap so that the
    Hann overlap-add reconstruction is exact away from the signal edges.
    """

    window_size: int = 2048
    hop_size: int = 512
    window_kind: str = "hann"
    sample_rate: int = 44100

    def __post_init__(self) -> None:
        w, h = self.window_size, self.hop_size
        if w < 64:
            raise ConfigError(f"window_size must be >= 64, got {w}")
        if w & (w - 1) != 0:
            raise ConfigError(f"window_size must be a power of two, got {w}")
        if h < 1:
            raise ConfigError(f"hop_size must be >= 1, got {h}")
        if w % h != 0:
            raise ConfigError(f"hop_size {h} must divide window_size {w}")
        if h > w // 2:
            raise ConfigError(
                f"hop_size {h} must be <= window_size/2 ({w // 2}) for exact "
                "Hann overlap-add reconstruction"
            )
        if self.window_kind != "hann":
            raise ConfigError(f"unsupported window kind: {self.window_kind!r}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def num_bins(self) -> int:
        return self.window_size // 2 + 1

    def frame_count(self, num_samples: int) -> int:
        """Number of frames covering a signal; a partial last frame is kept."""
        if num_samples <= self.window_size:
            return 1
        return int(np.ceil((num_samples - self.window_size) / self.hop_size)) + 1

    def frame_times(self, num_frames: int) -> np.ndarray:
        """Center time of each frame in seconds."""
        starts = np.arange(num_frames) * self.hop_size
        return (starts + self.window_size / 2.0) / self.sample_rate


@dataclass
class Spectrogram:
    """Magnitude/phase split of an STFT plus the parameters that produced it.

    ``num_samples`` remembers the pre-padding source length so that
    resynthesized audio can be trimmed back to it.
    """

    magnitudes: np.ndarray
    phases: np.ndarray
    params: StftParams
    num_samples: int | None = None

    def __post_init__(self) -> None:
        self.magnitudes = np.asarray(self.magnitudes, dtype=np.float64)
        self.phases = np.asarray(self.phases, dtype=np.float64)
        if self.magnitudes.shape != self.phases.shape:
            raise ShapeError(
                f"magnitudes {self.magnitudes.shape} and phases "
                f"{self.phases.shape} differ in shape"
            )
        if self.magnitudes.ndim != 2:
            raise ShapeError("spectrogram matrices must be 2-D (bins x frames)")
        if self.magnitudes.shape[0] != self.params.num_bins:
            raise ShapeError(
                f"expected {self.params.num_bins} bins for window "
                f"{self.params.window_size}, got {self.magnitudes.shape[0]}"
            )
        if np.any(self.magnitudes < 0):
            raise InputError("magnitudes must be element-wise non-negative")

    @property
    def num_bins(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def num_frames(self) -> int:
        return self.magnitudes.shape[1]

    def complex_values(self) -> np.ndarray:
        """Reassemble the complex STFT matrix."""
        return self.magnitudes * np.exp(1j * self.phases)

    def with_magnitudes(self, magnitudes: np.ndarray) -> "Spectrogram":
        """Same phases and framing, new magnitude matrix."""
        return replace(self, magnitudes=np.asarray(magnitudes, dtype=np.float64))


def analyze(audio: np.ndarray, params: StftParams) -> Spectrogram:
    """Split a mono signal into magnitude and phase matrices.

    Frames start every ``hop_size`` samples from sample 0; the final partial
    frame is zero-padded to a full window.
    """
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1:
        raise InputError(f"expected a mono 1-D signal, got shape {audio.shape}")
    if audio.size == 0:
        raise InputError("cannot analyze an empty signal")

    window, hop = params.window_size, params.hop_size
    num_frames = params.frame_count(audio.size)
    padded_len = (num_frames - 1) * hop + window
    padded = np.zeros(padded_len, dtype=np.float64)
    padded[: audio.size] = audio

    frames = np.lib.stride_tricks.sliding_window_view(padded, window)[::hop]
    win = hann_window(window)
    stft = np.fft.rfft(frames * win, axis=1).T  # (bins, frames)

    return Spectrogram(
        magnitudes=np.abs(stft),
        phases=np.angle(stft),
        params=params,
        num_samples=audio.size,
    )


def synthesize(spec: Spectrogram) -> np.ndarray:
    """Invert a spectrogram by windowed overlap-add.

    Each inverse-FFT frame is weighted by the synthesis window and the result
    is normalized by the accumulated squared window, which makes
    ``synthesize(analyze(x))`` reproduce ``x`` exactly wherever the window
    weight is nonzero and is the least-squares inversion for modified
    (e.g. masked) spectrograms.
    """
    window, hop = spec.params.window_size, spec.params.hop_size
    num_frames = spec.num_frames
    total = (num_frames - 1) * hop + window

    frames = np.fft.irfft(spec.complex_values().T, n=window, axis=1)
    win = hann_window(window)
    frames *= win

    out = np.zeros(total, dtype=np.float64)
    weight = np.zeros(total, dtype=np.float64)
    win_sq = win * win
    for t in range(num_frames):
        start = t * hop
        out[start : start + window] += frames[t]
        weight[start : start + window] += win_sq

    floor = max(float(weight.max()) * _RELATIVE_WEIGHT_FLOOR, _WEIGHT_FLOOR)
    covered = weight > _WEIGHT_FLOOR
    out[covered] /= np.maximum(weight[covered], floor)
    out[~covered] = 0.0

    if spec.num_samples is not None:
        if spec.num_samples <= total:
            out = out[: spec.num_samples]
        else:
            out = np.concatenate([out, np.zeros(spec.num_samples - total)])
    return out
