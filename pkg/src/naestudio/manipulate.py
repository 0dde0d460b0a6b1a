"""Declarative edits of a trained model's decoder weights.

Decoder weight matrices behave like arrays of mixing sliders: individual
entries can be set, whole columns scaled, permuted to reroute activations to
unrelated spectra, replaced with fresh random values (destroying sparsity and
densifying the output), or jittered multiplicatively (randomizing timbre while
preserving the zero-pattern). Ops never mutate the base model; each returns a
derived model, and a script of ops replays deterministically against the
recorded base hash.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InputError, ProvenanceError
from .model import NaeModel, model_hash

OP_KINDS = (
    "set_weight",
    "scale_column",
    "permute_columns",
    "randomize_replace",
    "randomize_multiplicative",
)

DISTRIBUTIONS = ("uniform", "truncated_normal")


@dataclass(frozen=True)
class ManipulationOp:
    """One decoder-weight edit with everything needed to replay it.

    ``layer`` indexes the decoder matrices 1 (innermost) to L (outermost);
    an empty ``columns`` tuple targets every column. Random ops require a
    seed so results are reproducible.
    """

    kind: str
    layer: int
    columns: tuple[int, ...] = ()
    row: int | None = None
    col: int | None = None
    value: float | None = None
    factor: float | None = None
    permutation: tuple[int, ...] | None = None
    avoid_fixed_points: bool = False
    distribution: str | None = None
    bounds: tuple[float, float] | None = None
    delta: float | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))
        if self.permutation is not None:
            object.__setattr__(self, "permutation", tuple(int(p) for p in self.permutation))
        if self.bounds is not None:
            object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        if self.kind not in OP_KINDS:
            raise InputError(f"unknown op kind: {self.kind!r}")
        if self.layer < 1:
            raise InputError(f"decoder layer index must be >= 1, got {self.layer}")
        if self.kind == "set_weight":
            if self.row is None or self.col is None or self.value is None:
                raise InputError("set_weight requires row, col, and value")
            if self.value < 0:
                raise InputError(f"weights must stay non-negative, got {self.value}")
        elif self.kind == "scale_column":
            if self.factor is None:
                raise InputError("scale_column requires a factor")
            if self.factor < 0:
                raise InputError(f"scale factor must be non-negative, got {self.factor}")
        elif self.kind == "permute_columns":
            if self.permutation is None and self.seed is None:
                raise InputError("permute_columns needs an explicit permutation or a seed")
        elif self.kind == "randomize_replace":
            if self.distribution not in DISTRIBUTIONS:
                raise InputError(
                    f"randomize_replace distribution must be one of {DISTRIBUTIONS}"
                )
            if self.bounds is None:
                raise InputError("randomize_replace requires distribution bounds")
            if self.distribution == "uniform":
                a, b = self.bounds
                if a < 0 or b < a:
                    raise InputError(f"uniform bounds must satisfy 0 <= a <= b, got {self.bounds}")
            else:
                if self.bounds[1] < 0:
                    raise InputError("truncated_normal sigma must be non-negative")
            if self.seed is None:
                raise InputError("randomize_replace requires a seed")
        elif self.kind == "randomize_multiplicative":
            if self.delta is None or not 0.0 <= self.delta < 1.0:
                raise InputError(
                    f"randomize_multiplicative requires delta in [0, 1), got {self.delta}"
                )
            if self.seed is None:
                raise InputError("randomize_multiplicative requires a seed")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "layer": self.layer}
        if self.columns:
            out["columns"] = list(self.columns)
        for name in ("row", "col", "value", "factor", "distribution", "delta", "seed"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.permutation is not None:
            out["permutation"] = list(self.permutation)
        if self.bounds is not None:
            out["bounds"] = list(self.bounds)
        if self.avoid_fixed_points:
            out["avoid_fixed_points"] = True
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ManipulationOp":
        known = {
            "kind",
            "layer",
            "columns",
            "row",
            "col",
            "value",
            "factor",
            "permutation",
            "avoid_fixed_points",
            "distribution",
            "bounds",
            "delta",
            "seed",
        }
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown op fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "columns" in kwargs:
            kwargs["columns"] = tuple(kwargs["columns"])
        if "permutation" in kwargs and kwargs["permutation"] is not None:
            kwargs["permutation"] = tuple(kwargs["permutation"])
        if "bounds" in kwargs and kwargs["bounds"] is not None:
            kwargs["bounds"] = tuple(kwargs["bounds"])
        return cls(**kwargs)


def _decoder_matrix(model: NaeModel, layer: int) -> np.ndarray:
    if not 1 <= layer <= model.num_layers:
        raise InputError(
            f"decoder layer {layer} out of range 1..{model.num_layers} "
            "(encoder weights are not editable)"
        )
    return model.decoder_weights[layer - 1]


def _with_decoder_matrix(model: NaeModel, layer: int, matrix: np.ndarray) -> NaeModel:
    decoder = [w.copy() for w in model.decoder_weights]
    decoder[layer - 1] = matrix
    return NaeModel(
        config=model.config,
        encoder_weights=[w.copy() for w in model.encoder_weights],
        decoder_weights=decoder,
    )


def _resolve_columns(matrix: np.ndarray, columns: tuple[int, ...]) -> tuple[int, ...]:
    n = matrix.shape[1]
    if not columns:
        return tuple(range(n))
    for c in columns:
        if not 0 <= c < n:
            raise InputError(f"column {c} out of range 0..{n - 1}")
    if len(set(columns)) != len(columns):
        raise InputError(f"duplicate column indices: {columns}")
    return columns


def set_weight(model: NaeModel, layer: int, row: int, col: int, value: float) -> NaeModel:
    """Return a model with exactly one decoder weight changed."""
    if value < 0:
        raise InputError(f"weights must stay non-negative, got {value}")
    w = _decoder_matrix(model, layer)
    if not (0 <= row < w.shape[0] and 0 <= col < w.shape[1]):
        raise InputError(f"entry ({row}, {col}) out of range for shape {w.shape}")
    out = w.copy()
    out[row, col] = value
    return _with_decoder_matrix(model, layer, out)


def scale_column(model: NaeModel, layer: int, columns: tuple[int, ...], factor: float) -> NaeModel:
    """Multiply whole columns by a non-negative factor."""
    if factor < 0:
        raise InputError(f"scale factor must be non-negative, got {factor}")
    w = _decoder_matrix(model, layer)
    cols = _resolve_columns(w, columns)
    out = w.copy()
    out[:, list(cols)] *= factor
    return _with_decoder_matrix(model, layer, out)


def sample_permutation(size: int, seed: int, avoid_fixed_points: bool = False) -> tuple[int, ...]:
    """Uniform random permutation; optionally resampled until derangement."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(size)
    if avoid_fixed_points and size > 1:
        while np.any(perm == np.arange(size)):
            perm = rng.permutation(size)
    return tuple(int(p) for p in perm)


def permute_columns(
    model: NaeModel,
    layer: int,
    permutation: tuple[int, ...] | None = None,
    seed: int | None = None,
    avoid_fixed_points: bool = False,
) -> NaeModel:
    """Reassign whole weight columns: column c moves to position permutation[c]."""
    w = _decoder_matrix(model, layer)
    n = w.shape[1]
    if permutation is None:
        if seed is None:
            raise InputError("permute_columns needs an explicit permutation or a seed")
        permutation = sample_permutation(n, seed, avoid_fixed_points)
    if sorted(permutation) != list(range(n)):
        raise InputError(f"not a bijection over 0..{n - 1}: {permutation}")
    out = np.empty_like(w)
    for src, dst in enumerate(permutation):
        out[:, dst] = w[:, src]
    return _with_decoder_matrix(model, layer, out)


def randomize_replace(
    model: NaeModel,
    layer: int,
    columns: tuple[int, ...],
    distribution: str,
    bounds: tuple[float, float],
    seed: int,
) -> NaeModel:
    """Resample targeted columns from scratch; untargeted columns stay bit-identical."""
    w = _decoder_matrix(model, layer)
    cols = _resolve_columns(w, columns)
    rng = np.random.default_rng(seed)
    shape = (w.shape[0], len(cols))
    if distribution == "uniform":
        a, b = bounds
        if a < 0 or b < a:
            raise InputError(f"uniform bounds must satisfy 0 <= a <= b, got {bounds}")
        fresh = rng.uniform(a, b, size=shape)
    elif distribution == "truncated_normal":
        mu, sigma = bounds
        if sigma < 0:
            raise InputError("truncated_normal sigma must be non-negative")
        fresh = np.maximum(rng.normal(mu, sigma, size=shape), 0.0)
    else:
        raise InputError(f"unknown distribution: {distribution!r}")
    out = w.copy()
    out[:, list(cols)] = fresh
    return _with_decoder_matrix(model, layer, out)


def randomize_multiplicative(
    model: NaeModel,
    layer: int,
    columns: tuple[int, ...],
    delta: float,
    seed: int,
) -> NaeModel:
    """Jitter targeted entries by uniform factors in [1-delta, 1+delta].

    Zero entries stay exactly zero, so the sparsity pattern is untouched.
    """
    if not 0.0 <= delta < 1.0:
        raise InputError(f"delta must be in [0, 1), got {delta}")
    w = _decoder_matrix(model, layer)
    cols = _resolve_columns(w, columns)
    rng = np.random.default_rng(seed)
    factors = rng.uniform(1.0 - delta, 1.0 + delta, size=(w.shape[0], len(cols)))
    out = w.copy()
    out[:, list(cols)] = out[:, list(cols)] * factors
    return _with_decoder_matrix(model, layer, out)


def apply_op(model: NaeModel, op: ManipulationOp) -> NaeModel:
    if op.kind == "set_weight":
        return set_weight(model, op.layer, op.row, op.col, op.value)
    if op.kind == "scale_column":
        return scale_column(model, op.layer, op.columns, op.factor)
    if op.kind == "permute_columns":
        return permute_columns(
            model, op.layer, op.permutation, op.seed, op.avoid_fixed_points
        )
    if op.kind == "randomize_replace":
        return randomize_replace(
            model, op.layer, op.columns, op.distribution, op.bounds, op.seed
        )
    if op.kind == "randomize_multiplicative":
        return randomize_multiplicative(model, op.layer, op.columns, op.delta, op.seed)
    raise InputError(f"unknown op kind: {op.kind!r}")


def resolve_op(model: NaeModel, op: ManipulationOp) -> ManipulationOp:
    """Fill in sampled parameters so the recorded op replays verbatim."""
    if op.kind == "permute_columns" and op.permutation is None:
        n = _decoder_matrix(model, op.layer).shape[1]
        perm = sample_permutation(n, op.seed, op.avoid_fixed_points)
        return replace(op, permutation=perm)
    return op


@dataclass
class ManipulationScript:
    """Ordered op list bound to the hash of the model it applies to."""

    base_model_hash: str
    ops: list[ManipulationOp] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "format": "nae-script",
            "version": 1,
            "base_model_hash": self.base_model_hash,
            "ops": [op.to_dict() for op in self.ops],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ManipulationScript":
        doc = json.loads(text)
        if doc.get("format") != "nae-script":
            raise InputError("not a manipulation script document")
        return cls(
            base_model_hash=doc["base_model_hash"],
            ops=[ManipulationOp.from_dict(d) for d in doc["ops"]],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "ManipulationScript":
        return cls.from_json(Path(path).read_text())


def apply_script(model: NaeModel, script: ManipulationScript) -> NaeModel:
    """Replay a script against its base model; rejects a hash mismatch."""
    actual = model_hash(model)
    if actual != script.base_model_hash:
        raise ProvenanceError(
            f"script was recorded against model {script.base_model_hash[:12]}..., "
            f"got {actual[:12]}..."
        )
    derived = model
    for op in script.ops:
        derived = apply_op(derived, op)
    return derived
