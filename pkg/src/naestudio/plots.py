"""Report rendering: multi-layer deconstruction figures plus CSV tables.

Figures follow the layer-view conventions: activations drawn as horizontal
envelopes, inner weights as bar groups, outer spectra as vertical magnitude
plots with low frequencies at the bottom, and silent units dimmed. Alongside
the figures, the same matrices are written as comma-delimited tables.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .deconstruct import ComponentSet

_SILENT_ALPHA = 0.18
_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def _unit_color(index: int) -> str:
    return _COLORS[index % len(_COLORS)]


def write_layer_tables(cset: ComponentSet, out_dir: str | Path) -> list[Path]:
    """One activations CSV and one weights CSV per layer view."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for view in cset.layers:
        acts_path = out_dir / f"layer{view.layer_index}_activations.csv"
        with acts_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame"] + [f"unit_{u}" for u in range(view.num_units)])
            for t in range(view.activations.shape[1]):
                writer.writerow([t] + [repr(float(v)) for v in view.activations[:, t]])
        weights_path = out_dir / f"layer{view.layer_index}_weights.csv"
        with weights_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row"] + [f"unit_{u}" for u in range(view.num_units)])
            for r in range(view.weights_to_next.shape[0]):
                writer.writerow([r] + [repr(float(v)) for v in view.weights_to_next[r]])
        written += [acts_path, weights_path]
    return written


def plot_deconstruction(cset: ComponentSet, path: str | Path, dpi: int = 120) -> Path:
    """Layered figure: per-layer envelope rows, weight bars, outer spectra."""
    params = cset.spectrogram.params
    times = params.frame_times(cset.spectrogram.num_frames)
    num_layers = cset.num_layers
    outer = cset.layers[-1]
    ncols = max(view.num_units for view in cset.layers)

    fig = plt.figure(figsize=(1.8 * ncols + 2, 2.2 * (num_layers + 1)))
    grid = fig.add_gridspec(num_layers + 1, ncols, hspace=0.9, wspace=0.5)

    for row, view in enumerate(reversed(cset.layers)):
        for u in range(view.num_units):
            ax = fig.add_subplot(grid[num_layers - 1 - row + 1, u])
            alpha = _SILENT_ALPHA if view.silent[u] else 1.0
            ax.plot(times, view.activations[u], color=_unit_color(u), alpha=alpha, lw=0.9)
            ax.set_title(f"L{view.layer_index} unit {u}", fontsize=7)
            ax.tick_params(labelsize=5)
            if view.layer_index == 1 and u == 0:
                ax.set_xlabel("time (s)", fontsize=6)

    # outer spectra along the top row, low frequencies at the bottom
    freqs = np.arange(params.num_bins) * params.sample_rate / params.window_size
    spectra = outer.weights_to_next
    for u in range(spectra.shape[1]):
        ax = fig.add_subplot(grid[0, u])
        alpha = _SILENT_ALPHA if outer.silent[u] else 1.0
        ax.plot(spectra[:, u], freqs, color=_unit_color(u), alpha=alpha, lw=0.7)
        ax.set_title(f"spectrum {u}", fontsize=7)
        ax.tick_params(labelsize=5)
        if u == 0:
            ax.set_ylabel("frequency (Hz)", fontsize=6)

    selected = cset.selected_inner
    suffix = f" (inner unit {selected} selected)" if selected is not None else ""
    fig.suptitle(f"deconstruction: {num_layers} decoder layers{suffix}", fontsize=10)
    path = Path(path)
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_weight_bars(cset: ComponentSet, path: str | Path, dpi: int = 120) -> Path:
    """Inner mixing weights as bar groups, one panel per inner weight matrix."""
    inner_views = cset.layers[:-1]
    if not inner_views:
        fig, ax = plt.subplots(figsize=(4, 2))
        ax.text(0.5, 0.5, "shallow model: no inner weights", ha="center", va="center")
        ax.axis("off")
    else:
        fig, axes = plt.subplots(
            1, len(inner_views), figsize=(4 * len(inner_views), 3), squeeze=False
        )
        for ax, view in zip(axes[0], inner_views):
            w = view.weights_to_next
            positions = np.arange(w.shape[0], dtype=float)
            width = 0.8 / max(1, w.shape[1])
            for src in range(w.shape[1]):
                ax.bar(
                    positions + src * width,
                    w[:, src],
                    width=width,
                    color=_unit_color(src),
                    label=f"unit {src}",
                )
            ax.set_title(f"weights L{view.layer_index} -> L{view.layer_index + 1}", fontsize=8)
            ax.set_xlabel("target unit", fontsize=7)
            ax.tick_params(labelsize=6)
            ax.legend(fontsize=5)
    path = Path(path)
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_loss_curve(loss_log: str | Path, path: str | Path, dpi: int = 120) -> Path:
    rows = []
    for line in Path(loss_log).read_text().splitlines():
        it, value = line.split()
        rows.append((int(it), float(value)))
    iterations = [r[0] for r in rows]
    losses = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(iterations, losses, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    path = Path(path)
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def render_report(
    cset: ComponentSet, out_dir: str | Path, loss_log: str | Path | None = None
) -> list[Path]:
    """Write all figures and CSV tables for a component set into a directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        plot_deconstruction(cset, out_dir / "deconstruction.png"),
        plot_weight_bars(cset, out_dir / "weights.png"),
    ]
    if loss_log is not None and Path(loss_log).exists():
        written.append(plot_loss_curve(loss_log, out_dir / "loss.png"))
    written += write_layer_tables(cset, out_dir)
    return written
