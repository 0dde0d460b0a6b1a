"""Projected-gradient training of a model against a magnitude spectrogram.

The whole spectrogram is treated as one batch. Each iteration computes exact
analytic gradients of the generalized Kullback-Leibler loss (optionally with
an L1 penalty on the two outermost weight matrices), takes an RMSprop step,
and rectifies negative weights back to zero.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, NumericError, ShapeError
from .model import NaeModel, activation_derivative, apply_activation
from .stft import Spectrogram


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 3000
    learning_rate: float = 1e-3
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    sparsity_lambda: float = 0.0
    log_every: int = 50
    loss_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.rmsprop_decay < 1.0:
            raise ConfigError(f"rmsprop_decay must be in (0, 1), got {self.rmsprop_decay}")
        if self.rmsprop_epsilon <= 0:
            raise ConfigError("rmsprop_epsilon must be positive")
        if self.sparsity_lambda < 0:
            raise ConfigError("sparsity_lambda must be non-negative")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        if self.loss_epsilon <= 0:
            raise ConfigError("loss_epsilon must be positive")


def default_sparsity(num_layers: int) -> float:
    """Default L1 weight: off for shallow/2-layer models, on for deeper ones."""
    return 1e-4 if num_layers >= 3 else 0.0


@dataclass
class TrainReport:
    """Loss trace of one training run.

    ``loss_history`` holds (completed iterations, data loss, sparsity penalty)
    tuples; entry 0 is the loss of the initial model and the last entry the
    loss of the returned model.
    """

    loss_history: list[tuple[int, float, float]] = field(default_factory=list)
    final_loss: float = float("nan")
    wall_time_seconds: float = 0.0
    aborted: bool = False
    message: str = ""
    blas_threads_hint: str | None = None


@dataclass
class Gradients:
    """Per-matrix loss gradients, ordered like the model's weight lists."""

    encoder: list[np.ndarray]
    decoder: list[np.ndarray]


@dataclass
class RmspropState:
    """Squared-gradient accumulators, ordered like the model's weight lists."""

    encoder: list[np.ndarray]
    decoder: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: NaeModel) -> "RmspropState":
        return cls(
            encoder=[np.zeros_like(w) for w in model.encoder_weights],
            decoder=[np.zeros_like(w) for w in model.decoder_weights],
        )


def gkl_loss(x: np.ndarray, xhat: np.ndarray, loss_epsilon: float = 1e-8) -> float:
    """Mean generalized Kullback-Leibler divergence between two matrices.

    Both arguments are floored to ``loss_epsilon`` inside the logarithms;
    the x*log(x) term contributes zero where x is zero.
    """
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    if np.any(np.isnan(x)) or np.any(np.isnan(xhat)):
        raise NumericError("NaN in loss inputs")
    log_ratio = np.log(np.maximum(x, loss_epsilon)) - np.log(np.maximum(xhat, loss_epsilon))
    return float(np.mean(x * log_ratio - x + xhat))


def _forward_cached(model: NaeModel, x: np.ndarray):
    """Forward pass keeping every pre-activation and post-activation."""
    kinds = []
    pre = []
    post = [x]
    a = x
    n_dec = len(model.decoder_weights)
    for w in model.encoder_weights:
        z = w @ a
        a = apply_activation(model.config.inner_activation, z)
        kinds.append(model.config.inner_activation)
        pre.append(z)
        post.append(a)
    for i, w in enumerate(model.decoder_weights):
        kind = model.config.output_activation if i == n_dec - 1 else model.config.inner_activation
        z = w @ a
        a = apply_activation(kind, z)
        kinds.append(kind)
        pre.append(z)
        post.append(a)
    return kinds, pre, post


def _outer_penalty(model: NaeModel, lam: float) -> float:
    if lam == 0.0:
        return 0.0
    return float(
        lam * (np.abs(model.encoder_weights[0]).sum() + np.abs(model.decoder_weights[-1]).sum())
    )


def loss_with_sparsity(
    model: NaeModel, x: np.ndarray, sparsity_lambda: float, loss_epsilon: float = 1e-8
) -> tuple[float, float, float]:
    """Total loss, data term, and L1 penalty on the two outermost matrices."""
    _, _, post = _forward_cached(model, _as_input(model, x))
    data = gkl_loss(x, post[-1], loss_epsilon)
    penalty = _outer_penalty(model, sparsity_lambda)
    return data + penalty, data, penalty


def _as_input(model: NaeModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != model.config.input_dim:
        raise ShapeError(
            f"input must be ({model.config.input_dim}, T), got shape {x.shape}"
        )
    return x


def _loss_and_gradients(
    model: NaeModel, x: np.ndarray, sparsity_lambda: float, loss_epsilon: float
) -> tuple[float, float, Gradients]:
    x = _as_input(model, x)
    kinds, pre, post = _forward_cached(model, x)
    xhat = post[-1]
    data = gkl_loss(x, xhat, loss_epsilon)
    penalty = _outer_penalty(model, sparsity_lambda)

    # d(mean GKL)/dXhat; where Xhat sits below the log floor the log term is
    # locally constant, leaving only the +Xhat contribution.
    scale = 1.0 / x.size
    delta = scale * np.where(xhat > loss_epsilon, 1.0 - x / np.maximum(xhat, loss_epsilon), 1.0)

    weights = model.all_weights()
    grads: list[np.ndarray] = [None] * len(weights)  # type: ignore[list-item]
    for i in range(len(weights) - 1, -1, -1):
        dz = delta * activation_derivative(kinds[i], pre[i])
        grads[i] = dz @ post[i].T
        if i > 0:
            delta = weights[i].T @ dz

    n_enc = len(model.encoder_weights)
    if sparsity_lambda > 0.0:
        grads[0] = grads[0] + sparsity_lambda * np.sign(model.encoder_weights[0])
        grads[-1] = grads[-1] + sparsity_lambda * np.sign(model.decoder_weights[-1])

    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient encountered")

    return data, penalty, Gradients(encoder=grads[:n_enc], decoder=grads[n_enc:])


def gradients(
    model: NaeModel, x: np.ndarray, sparsity_lambda: float = 0.0, loss_epsilon: float = 1e-8
) -> Gradients:
    """Analytic gradients of :func:`loss_with_sparsity` w.r.t. every weight matrix."""
    _, _, grads = _loss_and_gradients(model, x, sparsity_lambda, loss_epsilon)
    return grads


def rmsprop_step(
    model: NaeModel,
    state: RmspropState,
    grads: Gradients,
    learning_rate: float,
    decay: float,
    epsilon: float,
) -> tuple[NaeModel, RmspropState]:
    """One RMSprop update: v <- rho*v + (1-rho)*g^2, w <- w - lr*g/(sqrt(v)+eps)."""

    def update(w, g, v):
        v_new = decay * v + (1.0 - decay) * g * g
        w_new = w - learning_rate * g / (np.sqrt(v_new) + epsilon)
        return w_new, v_new

    enc = [update(w, g, v) for w, g, v in zip(model.encoder_weights, grads.encoder, state.encoder)]
    dec = [update(w, g, v) for w, g, v in zip(model.decoder_weights, grads.decoder, state.decoder)]
    new_model = NaeModel(
        config=model.config,
        encoder_weights=[w for w, _ in enc],
        decoder_weights=[w for w, _ in dec],
    )
    new_state = RmspropState(encoder=[v for _, v in enc], decoder=[v for _, v in dec])
    return new_model, new_state


def project_nonnegative(model: NaeModel) -> NaeModel:
    """Rectify strictly negative weights to exactly zero (idempotent)."""
    return NaeModel(
        config=model.config,
        encoder_weights=[np.where(w < 0.0, 0.0, w) for w in model.encoder_weights],
        decoder_weights=[np.where(w < 0.0, 0.0, w) for w in model.decoder_weights],
    )


def train(
    model: NaeModel,
    spectrogram: Spectrogram,
    config: TrainConfig,
    progress=None,
    log_path=None,
) -> tuple[NaeModel, TrainReport]:
    """Fit the model to the spectrogram magnitudes.

    Runs ``config.iterations`` full-batch steps of gradients -> RMSprop ->
    non-negative projection. Deterministic for a fixed model and config.
    On a numeric failure the last finite model is returned with
    ``report.aborted`` set.
    """
    x = spectrogram.magnitudes
    if x.shape[0] != model.config.input_dim:
        raise ShapeError(
            f"spectrogram has {x.shape[0]} bins but model expects {model.config.input_dim}"
        )
    if np.any(x < 0):
        raise InputError("spectrogram magnitudes must be non-negative")
    if model.min_weight() < 0:
        raise InputError("model violates non-negativity; project it before training")

    report = TrainReport(blas_threads_hint=os.environ.get("OMP_NUM_THREADS"))
    state = RmspropState.zeros_like(model)
    start = time.perf_counter()

    def record(iteration: int, data: float, penalty: float) -> None:
        report.loss_history.append((iteration, data, penalty))
        if progress is not None:
            progress(iteration, data, penalty)

    completed_steps = 0
    try:
        for it in range(1, config.iterations + 1):
            data, penalty, grads = _loss_and_gradients(
                model, x, config.sparsity_lambda, config.loss_epsilon
            )
            if not np.isfinite(data):
                raise NumericError(f"non-finite loss at iteration {it}")
            if (it - 1) % config.log_every == 0:
                record(it - 1, data, penalty)
            new_model, state = rmsprop_step(
                model,
                state,
                grads,
                config.learning_rate,
                config.rmsprop_decay,
                config.rmsprop_epsilon,
            )
            new_model = project_nonnegative(new_model)
            if not all(np.all(np.isfinite(w)) for w in new_model.all_weights()):
                raise NumericError(f"non-finite weights after iteration {it}")
            model = new_model
            completed_steps = it
            assert model.min_weight() >= 0.0
    except NumericError as exc:
        report.aborted = True
        report.message = str(exc)

    try:
        total, data, penalty = loss_with_sparsity(
            model, x, config.sparsity_lambda, config.loss_epsilon
        )
        record(completed_steps, data, penalty)
        report.final_loss = total
    except NumericError:
        report.final_loss = float("nan")
    report.wall_time_seconds = time.perf_counter() - start

    if log_path is not None:
        lines = "".join(f"{it} {d + p!r}\n" for it, d, p in report.loss_history)
        Path(log_path).write_text(lines)

    return model, report
