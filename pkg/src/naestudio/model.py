"""Network definition and forward pass for shallow and deep non-negative autoencoders.

A depth-L model stores L encoder matrices (applied outermost first, mapping
the input dimension down to the latent size) and L decoder matrices (applied
innermost first, mapping back up). There are no bias vectors. All weights are
kept non-negative by initialization and by the training projection, which is
what makes decoder weights readable as spectra and mixing factors.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InputError, ShapeError

ACTIVATION_KINDS = ("relu", "softplus", "identity")

_SOFTPLUS_LINEAR_CUTOFF = 30.0  # ln(1+e^x) is x to double precision beyond this

_MAGIC = b"NAE-MODEL v1\n"


def apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "softplus":
        return np.where(
            z > _SOFTPLUS_LINEAR_CUTOFF,
            z,
            np.log1p(np.exp(np.minimum(z, _SOFTPLUS_LINEAR_CUTOFF))),
        )
    if kind == "identity":
        return z
    raise ConfigError(f"unknown activation kind: {kind!r}")


def activation_derivative(kind: str, z: np.ndarray) -> np.ndarray:
    """Element-wise derivative; relu uses subgradient 0 at exactly 0."""
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "softplus":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if kind == "identity":
        return np.ones_like(z)
    raise ConfigError(f"unknown activation kind: {kind!r}")


@dataclass(frozen=True)
class NaeConfig:
    """Architecture description.

    ``layer_sizes`` lists unit counts from the innermost (latent) layer
    outwards; they must strictly increase and stay below the input dimension.
    """

    input_dim: int
    layer_sizes: tuple[int, ...]
    inner_activation: str = "relu"
    output_activation: str = "softplus"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(k) for k in self.layer_sizes))
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if len(self.layer_sizes) < 1:
            raise ConfigError("at least one layer size is required")
        if any(k < 1 for k in self.layer_sizes):
            raise ConfigError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        for small, big in zip(self.layer_sizes, self.layer_sizes[1:]):
            if small >= big:
                raise ConfigError(
                    f"layer sizes must strictly increase outwards, got {self.layer_sizes}"
                )
        if self.layer_sizes[-1] >= self.input_dim:
            raise ConfigError(
                f"outer layer size {self.layer_sizes[-1]} must be smaller than "
                f"input_dim {self.input_dim}"
            )
        for kind in (self.inner_activation, self.output_activation):
            if kind not in ACTIVATION_KINDS:
                raise ConfigError(f"unknown activation kind: {kind!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def latent_dim(self) -> int:
        return self.layer_sizes[0]

    def encoder_shapes(self) -> list[tuple[int, int]]:
        """Shapes of the encoder matrices in application (outer-to-inner) order."""
        dims = [self.input_dim, *reversed(self.layer_sizes)]
        return [(dims[i + 1], dims[i]) for i in range(self.num_layers)]

    def decoder_shapes(self) -> list[tuple[int, int]]:
        """Shapes of the decoder matrices in application (inner-to-outer) order."""
        dims = [*self.layer_sizes, self.input_dim]
        return [(dims[i + 1], dims[i]) for i in range(self.num_layers)]


@dataclass
class NaeModel:
    """Weights of a (deep) non-negative autoencoder.

    ``encoder_weights`` is ordered outermost first, matching the order the
    matrices are applied when encoding; ``decoder_weights`` is ordered
    innermost first. Shape consistency is checked at construction;
    non-negativity is the training loop's responsibility.
    """

    config: NaeConfig
    encoder_weights: list[np.ndarray]
    decoder_weights: list[np.ndarray]

    def __post_init__(self) -> None:
        self.encoder_weights = [np.asarray(w, dtype=np.float64) for w in self.encoder_weights]
        self.decoder_weights = [np.asarray(w, dtype=np.float64) for w in self.decoder_weights]
        for name, mats, shapes in (
            ("encoder", self.encoder_weights, self.config.encoder_shapes()),
            ("decoder", self.decoder_weights, self.config.decoder_shapes()),
        ):
            if len(mats) != len(shapes):
                raise ShapeError(
                    f"{name} expects {len(shapes)} matrices, got {len(mats)}"
                )
            for i, (mat, shape) in enumerate(zip(mats, shapes)):
                if mat.shape != shape:
                    raise ShapeError(
                        f"{name} matrix {i} has shape {mat.shape}, expected {shape}"
                    )

    @property
    def num_layers(self) -> int:
        return self.config.num_layers

    def copy(self) -> "NaeModel":
        return NaeModel(
            config=self.config,
            encoder_weights=[w.copy() for w in self.encoder_weights],
            decoder_weights=[w.copy() for w in self.decoder_weights],
        )

    def min_weight(self) -> float:
        return min(float(w.min()) for w in self.encoder_weights + self.decoder_weights)

    def all_weights(self) -> list[np.ndarray]:
        """Encoder matrices (outer-to-inner) then decoder matrices (inner-to-outer)."""
        return [*self.encoder_weights, *self.decoder_weights]


def init_model(config: NaeConfig) -> NaeModel:
    """Draw Glorot-uniform weights and rectify negatives to zero.

    Matrices are drawn in document order (encoder outermost-to-innermost,
    then decoder innermost-to-outermost) from a generator seeded with
    ``config.seed``, so identical configs produce bit-identical models.
    """
    rng = np.random.default_rng(config.seed)

    def draw(shape: tuple[int, int]) -> np.ndarray:
        fan_out, fan_in = shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=shape)
        return np.where(w < 0.0, 0.0, w)

    return NaeModel(
        config=config,
        encoder_weights=[draw(s) for s in config.encoder_shapes()],
        decoder_weights=[draw(s) for s in config.decoder_shapes()],
    )


def _check_input(x: np.ndarray, expected_rows: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"{what} must be 2-D, got shape {x.shape}")
    if x.shape[0] != expected_rows:
        raise ShapeError(f"{what} has {x.shape[0]} rows, expected {expected_rows}")
    return x


def encode(model: NaeModel, x: np.ndarray) -> np.ndarray:
    """Map an input matrix down to the latent activations."""
    x = _check_input(x, model.config.input_dim, "input")
    if np.any(x < 0):
        raise InputError("encoder input must be element-wise non-negative")
    a = x
    for w in model.encoder_weights:
        a = apply_activation(model.config.inner_activation, w @ a)
    return a


def decode(model: NaeModel, h: np.ndarray) -> np.ndarray:
    """Map latent activations back up to a reconstruction."""
    a = _check_input(h, model.config.latent_dim, "latent matrix")
    last = len(model.decoder_weights) - 1
    for i, w in enumerate(model.decoder_weights):
        kind = model.config.output_activation if i == last else model.config.inner_activation
        a = apply_activation(kind, w @ a)
    return a


def forward(model: NaeModel, x: np.ndarray) -> np.ndarray:
    """Full reconstruction pass; exactly ``decode(model, encode(model, x))``."""
    return decode(model, encode(model, x))


# ---------------------------------------------------------------------------
# Serialization: a text header (JSON) followed by raw little-endian float64
# matrices in document order, each prefixed by u64 row/column counts.
# ---------------------------------------------------------------------------


def _matrix_names(config: NaeConfig) -> list[str]:
    L = config.num_layers
    return [f"enc_{L - i}" for i in range(L)] + [f"dec_{i + 1}" for i in range(L)]


def serialize_model(model: NaeModel, metadata: dict | None = None) -> bytes:
    """Encode a model (and optional run metadata) as a self-describing blob."""
    config = model.config
    header = {
        "input_dim": config.input_dim,
        "layer_sizes": list(config.layer_sizes),
        "inner_activation": config.inner_activation,
        "output_activation": config.output_activation,
        "seed": config.seed,
        "matrices": _matrix_names(config),
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [_MAGIC, b"%d\n" % len(header_bytes), header_bytes, b"\n"]
    for w in model.all_weights():
        rows, cols = w.shape
        parts.append(struct.pack("<QQ", rows, cols))
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
    return b"".join(parts)


def deserialize_model(blob: bytes) -> tuple[NaeModel, dict]:
    """Inverse of :func:`serialize_model`; bit-exact round-trip."""
    if not blob.startswith(_MAGIC):
        raise FormatError("not a model container (bad magic)")
    pos = len(_MAGIC)
    newline = blob.index(b"\n", pos)
    header_len = int(blob[pos:newline])
    pos = newline + 1
    header = json.loads(blob[pos : pos + header_len].decode("utf-8"))
    pos += header_len + 1  # trailing newline after the header block

    config = NaeConfig(
        input_dim=header["input_dim"],
        layer_sizes=tuple(header["layer_sizes"]),
        inner_activation=header["inner_activation"],
        output_activation=header["output_activation"],
        seed=header["seed"],
    )
    matrices = []
    for _ in header["matrices"]:
        rows, cols = struct.unpack_from("<QQ", blob, pos)
        pos += 16
        count = rows * cols
        mat = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(rows, cols)
        matrices.append(mat.copy())
        pos += count * 8
    L = config.num_layers
    model = NaeModel(
        config=config,
        encoder_weights=matrices[:L],
        decoder_weights=matrices[L:],
    )
    return model, header.get("metadata", {})


def save_model(path, model: NaeModel, metadata: dict | None = None) -> None:
    Path(path).write_bytes(serialize_model(model, metadata))


def load_model(path) -> tuple[NaeModel, dict]:
    return deserialize_model(Path(path).read_bytes())


def model_hash(model: NaeModel) -> str:
    """Content hash over config and weights (metadata excluded)."""
    return hashlib.sha256(serialize_model(model, metadata=None)).hexdigest()
