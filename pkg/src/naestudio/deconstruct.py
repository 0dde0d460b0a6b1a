"""Extraction of the interpretable decoder surface of a trained model.

A component set is one view per decoder stage: the latent activations, then
each inner decoder layer's output, each paired with the weight matrix feeding
the next stage. The outermost weight matrix holds the spectra. Hierarchical
selection isolates the contribution of one latent unit by zeroing the others
and re-propagating through the decoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, IoError, ShapeError
from .model import NaeModel, apply_activation, encode, model_hash
from .stft import Spectrogram

# A unit whose activation row never rises above this is considered silent.
SILENT_THRESHOLD = 1e-12

# Activation rows longer than this are max-pooled down for export.
EXPORT_FRAME_CAP = 2000


@dataclass
class LayerView:
    """One decoder stage: unit activations over time plus the weights that
    feed the next stage (the outermost weights are the spectra)."""

    layer_index: int  # 1 = latent, num_layers = outermost
    activations: np.ndarray  # (units, frames)
    weights_to_next: np.ndarray  # (next-stage units, units)
    silent: np.ndarray  # (units,) bool

    @property
    def num_units(self) -> int:
        return self.activations.shape[0]


@dataclass
class ComponentSet:
    """All layer views of one model applied to one spectrogram."""

    layers: list[LayerView]
    model: NaeModel
    spectrogram: Spectrogram
    selected_inner: int | None = None

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def spectra(self) -> np.ndarray:
        """Outer decoder weights, one spectrum per column (bins x units)."""
        return self.layers[-1].weights_to_next

    @property
    def outer_activations(self) -> np.ndarray:
        return self.layers[-1].activations

    def outer_pre_activation(self) -> np.ndarray:
        """Input to the output nonlinearity: spectra times outer activations."""
        return self.spectra @ self.outer_activations

    def activations_of(self, layer_index: int) -> np.ndarray:
        if not 1 <= layer_index <= self.num_layers:
            raise InputError(
                f"layer index {layer_index} out of range 1..{self.num_layers}"
            )
        return self.layers[layer_index - 1].activations


def _silent_flags(activations: np.ndarray) -> np.ndarray:
    if activations.shape[1] == 0:
        return np.ones(activations.shape[0], dtype=bool)
    return activations.max(axis=1) < SILENT_THRESHOLD


def _decoder_views(model: NaeModel, latent: np.ndarray) -> list[LayerView]:
    """Propagate latent activations through the inner decoder layers."""
    acts = [latent]
    a = latent
    for w in model.decoder_weights[:-1]:
        a = apply_activation(model.config.inner_activation, w @ a)
        acts.append(a)
    return [
        LayerView(
            layer_index=i + 1,
            activations=acts[i],
            weights_to_next=model.decoder_weights[i],
            silent=_silent_flags(acts[i]),
        )
        for i in range(len(acts))
    ]


def extract(model: NaeModel, spectrogram: Spectrogram) -> ComponentSet:
    """Compute every layer's activations and weight view for a spectrogram."""
    if spectrogram.num_bins != model.config.input_dim:
        raise ShapeError(
            f"spectrogram has {spectrogram.num_bins} bins but model expects "
            f"{model.config.input_dim}"
        )
    latent = encode(model, spectrogram.magnitudes)
    return ComponentSet(
        layers=_decoder_views(model, latent),
        model=model,
        spectrogram=spectrogram,
    )


def hierarchical_select(cset: ComponentSet, inner_unit: int) -> ComponentSet:
    """Re-propagate with all latent units except one zeroed out.

    Weight matrices are unchanged; units whose activations receive no energy
    are flagged silent.
    """
    latent = cset.layers[0].activations
    if not 0 <= inner_unit < latent.shape[0]:
        raise InputError(
            f"inner unit {inner_unit} out of range 0..{latent.shape[0] - 1}"
        )
    selected = np.zeros_like(latent)
    selected[inner_unit] = latent[inner_unit]
    return ComponentSet(
        layers=_decoder_views(cset.model, selected),
        model=cset.model,
        spectrogram=cset.spectrogram,
        selected_inner=inner_unit,
    )


def _max_pool_rows(rows: np.ndarray, cap: int) -> tuple[np.ndarray, int]:
    """Decimate along time by max-pooling so peaks survive; returns factor."""
    n = rows.shape[1]
    if n <= cap:
        return rows, 1
    factor = int(np.ceil(n / cap))
    pad = (-n) % factor
    padded = np.pad(rows, ((0, 0), (0, pad)), constant_values=-np.inf)
    pooled = padded.reshape(rows.shape[0], -1, factor).max(axis=2)
    return pooled, factor


def view_document(
    cset: ComponentSet, max_frames: int = EXPORT_FRAME_CAP, source: str | None = None
) -> dict:
    """Build the exportable description of a component set."""
    params = cset.spectrogram.params
    layers = []
    for view in cset.layers:
        acts, factor = _max_pool_rows(view.activations, max_frames)
        layers.append(
            {
                "layer_index": view.layer_index,
                "num_units": view.num_units,
                "activations": acts.tolist(),
                "weights_to_next": view.weights_to_next.tolist(),
                "silent": view.silent.tolist(),
                "decimation_factor": factor,
            }
        )
    return {
        "format": "nae-view",
        "version": 1,
        "provenance": {
            "model_hash": model_hash(cset.model),
            "source": source,
            "stft": {
                "window_size": params.window_size,
                "hop_size": params.hop_size,
                "window_kind": params.window_kind,
                "sample_rate": params.sample_rate,
            },
        },
        "num_frames": cset.spectrogram.num_frames,
        "frame_duration_seconds": params.hop_size / params.sample_rate,
        "selected_inner_unit": cset.selected_inner,
        "layers": layers,
    }


def export_view(
    cset: ComponentSet,
    path: str | Path,
    max_frames: int = EXPORT_FRAME_CAP,
    source: str | None = None,
) -> dict:
    """Write the view document as JSON; returns the document."""
    doc = view_document(cset, max_frames, source=source)
    try:
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return doc


def load_view(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
