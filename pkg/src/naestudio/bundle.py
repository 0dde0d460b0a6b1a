"""Project bundle: the on-disk layout tying a source sound to its model.

A bundle directory holds the source WAV, the trained model container (whose
header records the STFT params, train settings, and seeds), the loss log,
the component view export, and subdirectories for manipulation scripts and
rendered audio. The manifest lists content hashes so every derived file can
be traced back to its inputs, and nothing in a bundle is ever rewritten:
derived results go to fresh bundles or output directories.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import load_wav, save_wav
from .deconstruct import ComponentSet, export_view, extract
from .errors import IoError, ProvenanceError
from .model import NaeModel, load_model, model_hash, save_model
from .stft import Spectrogram, StftParams, analyze
from .training import TrainReport

MODEL_FILE = "model.nae"
SOURCE_FILE = "source.wav"
VIEW_FILE = "components.json"
LOSS_FILE = "loss_log.txt"
MANIFEST_FILE = "bundle.json"
SCRIPTS_DIR = "scripts"
RENDERS_DIR = "renders"


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def stft_params_to_dict(params: StftParams) -> dict:
    return {
        "window_size": params.window_size,
        "hop_size": params.hop_size,
        "window_kind": params.window_kind,
        "sample_rate": params.sample_rate,
    }


def stft_params_from_dict(data: dict) -> StftParams:
    return StftParams(
        window_size=data["window_size"],
        hop_size=data["hop_size"],
        window_kind=data.get("window_kind", "hann"),
        sample_rate=data["sample_rate"],
    )


@dataclass
class Bundle:
    root: Path
    model: NaeModel
    metadata: dict
    samples: np.ndarray
    sample_rate: int

    @property
    def stft_params(self) -> StftParams:
        return stft_params_from_dict(self.metadata["stft"])

    @property
    def model_hash(self) -> str:
        return model_hash(self.model)

    def spectrogram(self) -> Spectrogram:
        return analyze(self.samples, self.stft_params)

    def component_set(self) -> ComponentSet:
        return extract(self.model, self.spectrogram())


def write_bundle(
    out_dir: str | Path,
    source: str | Path | None,
    samples: np.ndarray,
    sample_rate: int,
    model: NaeModel,
    params: StftParams,
    report: TrainReport | None,
    train_settings: dict | None = None,
    base_hash: str | None = None,
    script_text: str | None = None,
) -> Bundle:
    """Materialize a bundle directory; refuses to overwrite an existing one."""
    root = Path(out_dir)
    if root.exists() and any(root.iterdir()):
        raise IoError(f"refusing to write into non-empty directory {root}")
    root.mkdir(parents=True, exist_ok=True)
    (root / SCRIPTS_DIR).mkdir()
    (root / RENDERS_DIR).mkdir()

    save_wav(root / SOURCE_FILE, samples, sample_rate)

    metadata = {
        "stft": stft_params_to_dict(params),
        "train": train_settings or {},
        "source_name": Path(source).name if source else SOURCE_FILE,
    }
    if base_hash is not None:
        metadata["derived_from"] = base_hash
    save_model(root / MODEL_FILE, model, metadata)

    cset = extract(model, analyze(samples, params))
    export_view(cset, root / VIEW_FILE, source=metadata["source_name"])

    if report is not None:
        lines = "".join(f"{it} {d + p!r}\n" for it, d, p in report.loss_history)
        (root / LOSS_FILE).write_text(lines)

    if script_text is not None:
        (root / SCRIPTS_DIR / "applied.json").write_text(script_text)

    manifest = {
        "format": "nae-bundle",
        "version": 1,
        "model_hash": model_hash(model),
        "source_sha256": file_sha256(root / SOURCE_FILE),
        "model_sha256": file_sha256(root / MODEL_FILE),
        "stft": metadata["stft"],
        "train": metadata["train"],
        "source_name": metadata["source_name"],
    }
    if base_hash is not None:
        manifest["derived_from"] = base_hash
    (root / MANIFEST_FILE).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    return Bundle(
        root=root, model=model, metadata=metadata, samples=samples, sample_rate=sample_rate
    )


def load_bundle(root: str | Path, verify: bool = True) -> Bundle:
    root = Path(root)
    if not (root / MODEL_FILE).exists():
        raise IoError(f"{root} does not contain a model file")
    model, metadata = load_model(root / MODEL_FILE)
    samples, sample_rate = load_wav(root / SOURCE_FILE)
    if verify and (root / MANIFEST_FILE).exists():
        manifest = json.loads((root / MANIFEST_FILE).read_text())
        actual = model_hash(model)
        if manifest.get("model_hash") not in (None, actual):
            raise ProvenanceError(
                f"bundle manifest expects model {manifest['model_hash'][:12]}..., "
                f"found {actual[:12]}..."
            )
        recorded = manifest.get("source_sha256")
        if recorded is not None and recorded != file_sha256(root / SOURCE_FILE):
            raise ProvenanceError("source.wav does not match the manifest hash")
    return Bundle(
        root=root, model=model, metadata=metadata, samples=samples, sample_rate=sample_rate
    )
