"""Training loop (mini-batch Adam) and finite-difference gradient checking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import EmptyTrainingSetError, NonFiniteLossError
from .network import CnnParams, bce_loss, _forward_batch, init_params, loss_gradients

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; every field is overridable, the defaults are
    Kim-style values scaled to desk-size corpora."""

    d: int = 64
    widths: tuple[int, ...] = (2, 3, 4)
    n_filters: int = 32
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 13
    max_seq_len: int = 128
    min_freq: int = 2

    def __post_init__(self):
        for name in ("d", "n_filters", "epochs", "batch_size", "max_seq_len", "min_freq"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not self.widths or any(w < 1 for w in self.widths):
            raise ValueError("widths must be positive")
        if self.max_seq_len < max(self.widths):
            raise ValueError("max_seq_len must cover the widest filter")
        object.__setattr__(self, "widths", tuple(sorted(self.widths)))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "widths": list(self.widths),
            "n_filters": self.n_filters,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "max_seq_len": self.max_seq_len,
            "min_freq": self.min_freq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        data["widths"] = tuple(data["widths"])
        return cls(**data)

    def override(self, **kwargs) -> "TrainConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass
class _AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    def step(self, params: CnnParams, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        for name, tensor in params.tensor_items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(tensor)
                self.v[name] = np.zeros_like(tensor)
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            m_hat = m / (1.0 - ADAM_BETA1**self.t)
            v_hat = v / (1.0 - ADAM_BETA2**self.t)
            tensor -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def train(
    data: list[tuple[np.ndarray, set[int] | frozenset[int]]],
    config: TrainConfig,
    n_labels: int,
    vocab_size: int,
) -> tuple[CnnParams, list[float]]:
    """Train a CNN over (id sequence, positive label index set) pairs.

    Deterministic for a fixed config.seed: identical loss history and
    parameter bytes across runs. Raises NonFiniteLossError with
    diagnostics instead of propagating NaNs.
    """
    if not data:
        raise EmptyTrainingSetError("no training examples")
    ids = np.stack([np.asarray(seq, dtype=np.int64) for seq, _ in data])
    targets = np.zeros((len(data), n_labels))
    for row, (_, positives) in enumerate(data):
        for label_idx in positives:
            targets[row, label_idx] = 1.0

    rng = np.random.default_rng(config.seed)
    params = init_params(
        vocab_size=vocab_size,
        n_labels=n_labels,
        d=config.d,
        widths=config.widths,
        n_filters=config.n_filters,
        rng=rng,
    )
    adam = _AdamState()
    history: list[float] = []
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            loss, grads = loss_gradients(params, ids[batch_idx], targets[batch_idx])
            if not math.isfinite(loss):
                raise NonFiniteLossError(
                    f"loss became non-finite at epoch {epoch}, batch start {start} "
                    f"(learning_rate={config.learning_rate})"
                )
            adam.step(params, grads, config.learning_rate)
            total += loss * len(batch_idx)
        history.append(total / n)
    return params, history


def gradient_check(
    params: CnnParams,
    ids: np.ndarray,
    targets: np.ndarray,
    h: float = 1e-5,
    analytic: dict[str, np.ndarray] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Walks every parameter scalar, so keep the network small (<= 1e4
    parameters). Passing a precomputed (possibly corrupted) analytic
    gradient dict lets callers prove the check is sensitive.
    """
    ids = np.atleast_2d(np.asarray(ids))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if analytic is None:
        _, analytic = loss_gradients(params, ids, targets)

    def loss_at() -> float:
        scores, _ = _forward_batch(params, ids)
        return bce_loss(scores, targets)

    worst = 0.0
    for name, tensor in params.tensor_items():
        grad = analytic[name]
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = loss_at()
            flat[i] = original - h
            minus = loss_at()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            rel = abs(gflat[i] - numeric) / max(abs(gflat[i]) + abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
