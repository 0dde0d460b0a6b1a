"""Local HTTP session over one loaded bundle.

One process serves one bundle to one user: the studio UI inspects layer
views, posts weight edits and randomizations, undoes them, and auditions
renders. Mutations are serialized under a lock and recorded in a replayable
script; renders are cached by (model hash, render spec) and returned as WAV
bytes, so identical requests stream identical bytes.

Endpoints: GET /health, GET /view, GET /script, POST /ops,
DELETE /ops/last, POST /render.
"""

from __future__ import annotations

import io
import struct
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .bundle import Bundle, load_bundle
from .deconstruct import extract, hierarchical_select, view_document
from .errors import InputError, NaestudioError
from .manipulate import ManipulationOp, ManipulationScript, apply_op, resolve_op
from .model import model_hash
from .resynth import RenderSpec, render_component


class OpBody(BaseModel):
    kind: str
    layer: int
    columns: list[int] = Field(default_factory=list)
    row: int | None = None
    col: int | None = None
    value: float | None = None
    factor: float | None = None
    permutation: list[int] | None = None
    avoid_fixed_points: bool = False
    distribution: str | None = None
    bounds: list[float] | None = None
    delta: float | None = None
    seed: int | None = None

    def to_op(self) -> ManipulationOp:
        return ManipulationOp(
            kind=self.kind,
            layer=self.layer,
            columns=tuple(self.columns),
            row=self.row,
            col=self.col,
            value=self.value,
            factor=self.factor,
            permutation=tuple(self.permutation) if self.permutation is not None else None,
            avoid_fixed_points=self.avoid_fixed_points,
            distribution=self.distribution,
            bounds=tuple(self.bounds) if self.bounds is not None else None,
            delta=self.delta,
            seed=self.seed,
        )


class RenderBody(BaseModel):
    mode: str
    basis_unit: int
    activation_unit: int
    activation_layer: int | None = None
    gamma: float | None = None

    def to_spec(self) -> RenderSpec:
        return RenderSpec(
            mode=self.mode,
            basis_unit=self.basis_unit,
            activation_unit=self.activation_unit,
            activation_layer=self.activation_layer,
            gamma=self.gamma,
        )


def wav_bytes(samples: np.ndarray, sample_rate: int) -> bytes:
    """Mono 32-bit float WAV in memory."""
    payload = np.asarray(samples).astype("<f4").tobytes()
    buf = io.BytesIO()
    buf.write(b"RIFF")
    buf.write(struct.pack("<I", 4 + 8 + 16 + 8 + len(payload)))
    buf.write(b"WAVE")
    buf.write(b"fmt ")
    buf.write(struct.pack("<I", 16))
    buf.write(struct.pack("<HHIIHH", 3, 1, sample_rate, sample_rate * 4, 4, 32))
    buf.write(b"data")
    buf.write(struct.pack("<I", len(payload)))
    buf.write(payload)
    return buf.getvalue()


class SessionState:
    """Base model plus the op script and caches for the derived model."""

    def __init__(self, bundle: Bundle):
        self.bundle = bundle
        self.base_model = bundle.model
        self.spectrogram = bundle.spectrogram()
        self.model = bundle.model
        self.script = ManipulationScript(base_model_hash=model_hash(bundle.model))
        self.render_cache: dict[tuple, bytes] = {}
        self.lock = threading.Lock()
        self.training = False
        self._component_sets: dict[str, object] = {}

    def component_set(self):
        key = model_hash(self.model)
        if key not in self._component_sets:
            self._component_sets.clear()
            self._component_sets[key] = extract(self.model, self.spectrogram)
        return self._component_sets[key]

    def apply(self, op: ManipulationOp) -> tuple[str, int]:
        with self.lock:
            resolved = resolve_op(self.model, op)
            self.model = apply_op(self.model, resolved)
            self.script.ops.append(resolved)
            return model_hash(self.model), len(self.script.ops) - 1

    def undo(self) -> str:
        with self.lock:
            if not self.script.ops:
                raise InputError("no ops to undo")
            self.script.ops.pop()
            model = self.base_model
            for op in self.script.ops:
                model = apply_op(model, op)
            self.model = model
            return model_hash(self.model)

    def render_bytes(self, spec: RenderSpec) -> tuple[bytes, bool]:
        key = (model_hash(self.model), spec.cache_key())
        with self.lock:
            cached = self.render_cache.get(key)
        if cached is not None:
            return cached, True
        rendered = render_component(self.component_set(), spec)
        data = wav_bytes(rendered.audio, self.bundle.sample_rate)
        with self.lock:
            self.render_cache[key] = data
        return data, False


def create_app(bundle_dir: str | Path) -> FastAPI:
    bundle = load_bundle(bundle_dir)
    state = SessionState(bundle)
    app = FastAPI(title="naestudio session")
    app.state.session = state

    @app.get("/health")
    def health():
        return {"status": "ok", "model_hash": model_hash(state.model)}

    @app.get("/view")
    def view(inner_unit: int | None = None):
        if state.training:
            raise HTTPException(status_code=409, detail="training in progress")
        cset = state.component_set()
        if inner_unit is not None:
            try:
                cset = hierarchical_select(cset, inner_unit)
            except NaestudioError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        doc = view_document(cset, source=state.bundle.metadata.get("source_name"))
        return doc

    @app.get("/script")
    def script():
        return {
            "format": "nae-script",
            "version": 1,
            "base_model_hash": state.script.base_model_hash,
            "ops": [op.to_dict() for op in state.script.ops],
        }

    @app.post("/ops")
    def post_op(body: OpBody):
        try:
            op = body.to_op()
            new_hash, index = state.apply(op)
        except NaestudioError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        cset = state.component_set()
        changed = [
            {
                "layer_index": view.layer_index,
                "num_units": view.num_units,
                "activations": view.activations.tolist(),
                "weights_to_next": view.weights_to_next.tolist(),
                "silent": view.silent.tolist(),
            }
            for view in cset.layers
            if view.layer_index >= op.layer
        ]
        return {"model_hash": new_hash, "op_index": index, "changed_layers": changed}

    @app.delete("/ops/last")
    def undo():
        try:
            new_hash = state.undo()
        except InputError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"model_hash": new_hash, "ops_remaining": len(state.script.ops)}

    @app.post("/render")
    def post_render(body: RenderBody):
        try:
            spec = body.to_spec()
            data, cached = state.render_bytes(spec)
        except NaestudioError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return Response(
            content=data,
            media_type="audio/wav",
            headers={
                "X-Model-Hash": model_hash(state.model),
                "X-Cache": "hit" if cached else "miss",
            },
        )

    return app
