"""Rendering components back to audio.

Original components use conservative Wiener masks, which partition the input
magnitudes so that all components sum back to the mixture. Pairing a spectrum
with an activation it was not trained with (cross-component within the outer
layer, or cross-layer with an inner layer's activation) uses a bounded mask
whose gamma term keeps the ratio finite and tames extreme peaks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deconstruct import ComponentSet
from .errors import InputError, ShapeError
from .stft import Spectrogram, synthesize

# Conservative-mask denominators at or below this are treated as empty points.
DENOMINATOR_FLOOR = 1e-12

MODES = ("original", "cross_component", "cross_layer")


@dataclass(frozen=True)
class RenderSpec:
    """Recipe pairing an outer-layer spectrum with an activation row.

    ``gamma=None`` asks for the scale-relative default (only meaningful for
    the cross modes; original components always use the conservative mask).
    """

    mode: str
    basis_unit: int
    activation_unit: int
    activation_layer: int | None = None  # None = outer layer
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise InputError(f"unknown render mode: {self.mode!r}")
        if self.basis_unit < 0 or self.activation_unit < 0:
            raise InputError("unit indices must be non-negative")
        if self.gamma is not None and self.gamma < 0:
            raise InputError(f"gamma must be non-negative, got {self.gamma}")
        if self.mode == "original" and self.basis_unit != self.activation_unit:
            raise InputError("original mode pairs a spectrum with its own activation")
        if self.mode == "cross_component" and self.basis_unit == self.activation_unit:
            raise InputError("cross_component mode requires distinct unit indices")
        if self.mode == "cross_layer" and self.activation_layer is None:
            raise InputError("cross_layer mode requires an activation layer")

    @classmethod
    def original(cls, unit: int) -> "RenderSpec":
        return cls(mode="original", basis_unit=unit, activation_unit=unit)

    @classmethod
    def cross_component(cls, basis_unit: int, activation_unit: int, gamma: float | None = None) -> "RenderSpec":
        return cls(
            mode="cross_component",
            basis_unit=basis_unit,
            activation_unit=activation_unit,
            gamma=gamma,
        )

    @classmethod
    def cross_layer(
        cls, basis_unit: int, activation_unit: int, layer: int, gamma: float | None = None
    ) -> "RenderSpec":
        return cls(
            mode="cross_layer",
            basis_unit=basis_unit,
            activation_unit=activation_unit,
            activation_layer=layer,
            gamma=gamma,
        )

    def cache_key(self) -> tuple:
        return (self.mode, self.basis_unit, self.activation_unit, self.activation_layer, self.gamma)


@dataclass
class RenderedComponent:
    """A mask applied to the source spectrogram plus its time-domain signal."""

    mask: np.ndarray
    complex_stft: np.ndarray
    audio: np.ndarray
    spec: RenderSpec | None = None


def _check_units(cset: ComponentSet, i: int, j: int, m: int) -> None:
    k_outer = cset.spectra.shape[1]
    if not 1 <= m <= cset.num_layers:
        raise InputError(f"activation layer {m} out of range 1..{cset.num_layers}")
    k_m = cset.activations_of(m).shape[0]
    if not 0 <= i < k_outer:
        raise InputError(f"basis unit {i} out of range 0..{k_outer - 1}")
    if not 0 <= j < k_m:
        raise InputError(f"activation unit {j} out of range 0..{k_m - 1} in layer {m}")


def component_spectrogram(cset: ComponentSet, i: int, j: int, m: int | None = None) -> np.ndarray:
    """Outer product of outer-layer spectrum i with layer-m activation row j."""
    m = cset.num_layers if m is None else m
    _check_units(cset, i, j, m)
    return np.outer(cset.spectra[:, i], cset.activations_of(m)[j])


def _component_stack(cset: ComponentSet, m: int) -> np.ndarray:
    """All same-index components w_k (x) h_k for layer m, stacked (k, F, T).

    Pairs the first min(K_outer, K_m) indices; with strictly growing layer
    sizes that is all of layer m's units.
    """
    spectra = cset.spectra
    acts = cset.activations_of(m)
    k = min(spectra.shape[1], acts.shape[0])
    return np.einsum("fk,kt->kft", spectra[:, :k], acts[:k])


def conservative_mask(cset: ComponentSet, k: int) -> np.ndarray:
    """Wiener mask of original component k: its share of the summed components.

    Values lie in [0, 1] and the masks over all k sum to one wherever the
    component sum is above the floor; empty points get mask zero.
    """
    stack = _component_stack(cset, cset.num_layers)
    if not 0 <= k < stack.shape[0]:
        raise InputError(f"component {k} out of range 0..{stack.shape[0] - 1}")
    denominator = stack.sum(axis=0)
    return stack[k] / np.maximum(denominator, DENOMINATOR_FLOOR)


def hierarchical_mask(full: ComponentSet, selected: ComponentSet, k: int) -> np.ndarray:
    """Mask of outer component k restricted to one inner unit's contribution.

    The numerator uses the selected set's activations but the denominator
    stays the full component sum, so masks over all (inner unit, k) pairs
    still partition the mixture.
    """
    num_stack = _component_stack(selected, selected.num_layers)
    if not 0 <= k < num_stack.shape[0]:
        raise InputError(f"component {k} out of range 0..{num_stack.shape[0] - 1}")
    denominator = _component_stack(full, full.num_layers).sum(axis=0)
    return num_stack[k] / np.maximum(denominator, DENOMINATOR_FLOOR)


def default_gamma(cset: ComponentSet, m: int | None = None) -> float:
    """Scale-relative bounding term: 1% of the largest summed-component value."""
    m = cset.num_layers if m is None else m
    denominator = _component_stack(cset, m).sum(axis=0)
    peak = float(denominator.max()) if denominator.size else 0.0
    return 0.01 * peak


def bounded_mask(
    cset: ComponentSet, i: int, j: int, m: int | None = None, gamma: float | None = None
) -> np.ndarray:
    """Mask for a recombined component, bounded by the gamma term.

    Unlike the conservative mask this is not limited to [0, 1]: it can exceed
    one and amplify time-frequency points. At points where every component is
    zero the value is gamma/K_m over gamma, i.e. 1/K_m for any gamma > 0.
    """
    m = cset.num_layers if m is None else m
    _check_units(cset, i, j, m)
    if gamma is None:
        gamma = default_gamma(cset, m)
    if gamma < 0:
        raise InputError(f"gamma must be non-negative, got {gamma}")
    k_m = cset.activations_of(m).shape[0]
    numerator = np.outer(cset.spectra[:, i], cset.activations_of(m)[j]) + gamma / k_m
    denominator = _component_stack(cset, m).sum(axis=0) + gamma
    return numerator / np.maximum(denominator, DENOMINATOR_FLOOR)


def render(spectrogram: Spectrogram, mask: np.ndarray) -> RenderedComponent:
    """Apply a mask to the source magnitudes, attach the source phase, invert."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != spectrogram.magnitudes.shape:
        raise ShapeError(
            f"mask shape {mask.shape} does not match spectrogram "
            f"{spectrogram.magnitudes.shape}"
        )
    if np.any(mask < 0):
        raise InputError("mask must be element-wise non-negative")
    masked = spectrogram.with_magnitudes(mask * spectrogram.magnitudes)
    return RenderedComponent(
        mask=mask,
        complex_stft=masked.complex_values(),
        audio=synthesize(masked),
    )


def render_component(cset: ComponentSet, spec: RenderSpec) -> RenderedComponent:
    """Render per the spec: conservative mask for originals, bounded otherwise."""
    L = cset.num_layers
    m = L if spec.activation_layer is None else spec.activation_layer
    if spec.mode == "cross_layer":
        if m == L:
            raise InputError("cross_layer mode requires an inner activation layer")
    elif m != L:
        raise InputError(f"{spec.mode} mode uses the outer layer, got layer {m}")

    if spec.mode == "original":
        mask = conservative_mask(cset, spec.basis_unit)
    else:
        mask = bounded_mask(cset, spec.basis_unit, spec.activation_unit, m, spec.gamma)
    rendered = render(cset.spectrogram, mask)
    rendered.spec = spec
    return rendered
