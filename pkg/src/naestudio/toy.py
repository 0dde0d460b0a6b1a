"""Procedural three-source test mixture.

Two harmonic tones with distinct pitches and note envelopes plus gated white
noise, mixed with a faint wideband bed into about six seconds of mono audio.
The fundamentals sit exactly on analysis bins for a 1024-sample window at
16 kHz, and the designed amplitude envelopes are kept alongside the samples
so separations can be scored against ground truth. The bed keeps every
time-frequency point above the output nonlinearity's representable floor,
like the residual noise of a real recording.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stft import StftParams

SOURCE_NAMES = ("high_notes", "low_notes", "noise_bursts")

_HIGH_NOTES = ((0.30, 1.00), (2.30, 3.00), (4.30, 5.00))
_LOW_NOTES = ((1.10, 2.10), (3.10, 4.10))
_NOISE_BURSTS = ((0.05, 0.40), (1.95, 2.40), (5.15, 5.60))

_HIGH_F0 = 437.5  # bin 28 at window 1024 / 16 kHz
_LOW_F0 = 187.5  # bin 12
_BED_LINE_AMPLITUDE = 0.007


def toy_stft_params(sample_rate: int = 16000) -> StftParams:
    return StftParams(window_size=1024, hop_size=256, sample_rate=sample_rate)


def _note_envelope(t: np.ndarray, spans, attack=0.03, release=0.08, decay_to=0.75) -> np.ndarray:
    env = np.zeros_like(t)
    for start, end in spans:
        inside = (t >= start) & (t <= end)
        ti = t[inside]
        rise = np.minimum(1.0, (ti - start) / attack)
        fall = np.minimum(1.0, (end - ti) / release)
        sag = 1.0 - (1.0 - decay_to) * (ti - start) / (end - start)
        env[inside] = np.maximum(env[inside], rise * fall * sag)
    return env


def _gate_envelope(t: np.ndarray, spans) -> np.ndarray:
    env = np.zeros_like(t)
    for start, end in spans:
        env[(t >= start) & (t <= end)] = 1.0
    return env


def _harmonic_tone(t: np.ndarray, f0: float, num_harmonics: int, rng: np.random.Generator) -> np.ndarray:
    tone = np.zeros_like(t)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=num_harmonics)
    for h in range(1, num_harmonics + 1):
        tone += np.sin(2.0 * np.pi * f0 * h * t + phases[h - 1]) / h
    return tone


def _bed_drone(n: int, rng: np.random.Generator, period: int = 1024) -> np.ndarray:
    """Faint steady drone with one sine on every third analysis bin.

    The 3-bin spacing keeps each bin under exactly one line of the comb, so
    every spectrogram column of the drone is identical: a deterministic bed
    that lifts all bins above zero without adding frame-to-frame variance.
    """
    bins = np.arange(1, period // 2, 3)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=bins.size)
    steps = np.arange(period)
    one_period = (
        _BED_LINE_AMPLITUDE
        * np.sin(2.0 * np.pi * np.outer(bins, steps) / period + phases[:, None])
    ).sum(axis=0)
    reps = int(np.ceil(n / period))
    return np.tile(one_period, reps)[:n]


@dataclass
class ToyMixture:
    samples: np.ndarray
    sample_rate: int
    source_samples: np.ndarray  # (3, N)
    source_envelopes: np.ndarray  # (3, N) designed amplitude envelopes
    source_names: tuple[str, ...] = SOURCE_NAMES

    def frame_envelopes(self, params: StftParams) -> np.ndarray:
        """Ground-truth envelopes sampled at frame centers, shape (3, frames)."""
        num_frames = params.frame_count(self.samples.size)
        centers = np.arange(num_frames) * params.hop_size + params.window_size // 2
        centers = np.minimum(centers, self.samples.size - 1)
        return self.source_envelopes[:, centers]


def toy_mixture(sample_rate: int = 16000, duration: float = 6.0, seed: int = 2025) -> ToyMixture:
    """Synthesize the three-source mixture; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate

    env_high = _note_envelope(t, _HIGH_NOTES)
    env_low = _note_envelope(t, _LOW_NOTES)
    env_noise = _gate_envelope(t, _NOISE_BURSTS)

    high = env_high * _harmonic_tone(t, _HIGH_F0, 10, rng)
    low = env_low * _harmonic_tone(t, _LOW_F0, 14, rng)
    noise = env_noise * rng.standard_normal(n)
    bed = _bed_drone(n, rng)

    def normalized(x: np.ndarray, peak: float) -> np.ndarray:
        top = np.max(np.abs(x))
        return x * (peak / top) if top > 0 else x

    sources = np.stack(
        [normalized(high, 0.45), normalized(low, 0.45), normalized(noise, 0.40)]
    )
    return ToyMixture(
        samples=sources.sum(axis=0) + bed,
        sample_rate=sample_rate,
        source_samples=sources,
        source_envelopes=np.stack([env_high, env_low, env_noise]),
    )
