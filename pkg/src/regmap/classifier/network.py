"""Network parameters, forward pass, loss, and analytic gradients.

Architecture: embedding lookup, one valid 1-D convolution per filter
width followed by ReLU, max-over-time pooling per filter, concatenation,
and a fully connected sigmoid output layer (one output per control).

Padding is masked out structurally: embeddings at pad positions are
zeroed regardless of the stored pad row, and a convolution window joins
max pooling only when it lies entirely within real tokens, which makes
scores exactly invariant to the amount of trailing padding. A sequence
shorter than a filter width (including a fully padded one) contributes
its leading window instead; its padded tail is structurally zero, so a
pad-only input pools to relu(conv bias).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatchError
from .vocab import PAD_ID

EPS = 1e-12


@dataclass
class CnnParams:
    """All trainable tensors; float64 throughout."""

    embeddings: np.ndarray  # (vocab_size, d)
    conv_weights: dict[int, np.ndarray]  # width -> (n_filters, width, d)
    conv_biases: dict[int, np.ndarray]  # width -> (n_filters,)
    out_weights: np.ndarray  # (n_labels, total_filters)
    out_bias: np.ndarray  # (n_labels,)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(sorted(self.conv_weights))

    @property
    def n_labels(self) -> int:
        return self.out_weights.shape[0]

    def tensor_items(self) -> list[tuple[str, np.ndarray]]:
        """Tensors in canonical order; shared by Adam, gradient checking,
        and the snapshot file layout."""
        items: list[tuple[str, np.ndarray]] = [("embeddings", self.embeddings)]
        for w in self.widths:
            items.append((f"conv_w_{w}", self.conv_weights[w]))
            items.append((f"conv_b_{w}", self.conv_biases[w]))
        items.append(("out_weights", self.out_weights))
        items.append(("out_bias", self.out_bias))
        return items

    def copy(self) -> "CnnParams":
        return CnnParams(
            embeddings=self.embeddings.copy(),
            conv_weights={w: a.copy() for w, a in self.conv_weights.items()},
            conv_biases={w: a.copy() for w, a in self.conv_biases.items()},
            out_weights=self.out_weights.copy(),
            out_bias=self.out_bias.copy(),
        )

    def n_parameters(self) -> int:
        return sum(a.size for _, a in self.tensor_items())

    def validate(self) -> None:
        d = self.embeddings.shape[1]
        total_filters = 0
        for w in self.widths:
            cw = self.conv_weights[w]
            cb = self.conv_biases[w]
            if cw.ndim != 3 or cw.shape[1] != w or cw.shape[2] != d:
                raise ShapeMismatchError(
                    f"conv weights for width {w} have shape {cw.shape}, expected (*, {w}, {d})"
                )
            if cb.shape != (cw.shape[0],):
                raise ShapeMismatchError(
                    f"conv bias for width {w} has shape {cb.shape}, expected ({cw.shape[0]},)"
                )
            total_filters += cw.shape[0]
        if self.out_weights.shape[1] != total_filters:
            raise ShapeMismatchError(
                f"output weights expect {self.out_weights.shape[1]} pooled features, "
                f"convolutions produce {total_filters}"
            )
        if self.out_bias.shape != (self.out_weights.shape[0],):
            raise ShapeMismatchError("output bias length does not match label count")
        for name, a in self.tensor_items():
            if not np.isfinite(a).all():
                raise ShapeMismatchError(f"non-finite values in {name}")


def init_params(
    vocab_size: int,
    n_labels: int,
    d: int,
    widths: tuple[int, ...],
    n_filters: int,
    rng: np.random.Generator,
) -> CnnParams:
    """Seeded init: uniform(-0.05, 0.05) weights, zero biases, pad row zeroed."""
    scale = 0.05
    embeddings = rng.uniform(-scale, scale, size=(vocab_size, d))
    conv_weights = {}
    conv_biases = {}
    for w in sorted(widths):
        conv_weights[w] = rng.uniform(-scale, scale, size=(n_filters, w, d))
        conv_biases[w] = np.zeros(n_filters)
    out_weights = rng.uniform(-scale, scale, size=(n_labels, n_filters * len(widths)))
    out_bias = np.zeros(n_labels)
    embeddings[PAD_ID] = 0.0
    return CnnParams(
        embeddings=embeddings,
        conv_weights=conv_weights,
        conv_biases=conv_biases,
        out_weights=out_weights,
        out_bias=out_bias,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_batch(params: CnnParams, ids: np.ndarray) -> tuple[np.ndarray, dict]:
    """Score a batch of id sequences; returns (scores (B, L), cache)."""
    params.validate()
    if ids.ndim != 2:
        raise ShapeMismatchError(f"expected (batch, seq) ids, got shape {ids.shape}")
    batch, seq_len = ids.shape
    if seq_len < max(params.widths):
        raise ShapeMismatchError(
            f"sequence length {seq_len} shorter than widest filter {max(params.widths)}"
        )
    real = ids != PAD_ID  # (B, T)
    emb = params.embeddings[ids] * real[:, :, None]  # (B, T, d)
    cache: dict = {"ids": ids, "real": real, "per_width": {}}
    pooled_parts = []
    for w in params.widths:
        weights = params.conv_weights[w]
        bias = params.conv_biases[w]
        n_f = weights.shape[0]
        flat_w = weights.reshape(n_f, -1)  # (n_f, w*d)
        windows = sliding_window_view(emb, w, axis=1)  # (B, P, d, w)
        flat = windows.transpose(0, 1, 3, 2).reshape(batch, -1, w * emb.shape[2])
        pre = flat @ flat_w.T + bias  # (B, P, n_f)
        act = np.maximum(pre, 0.0)
        included = sliding_window_view(real, w, axis=1).all(axis=2)  # (B, P)
        no_full_window = ~included.any(axis=1)
        if no_full_window.any():
            # shorter-than-width or fully padded rows keep their leading
            # window; its padded tail embeds to zero
            included[no_full_window, 0] = True
        masked = np.where(included[:, :, None], act, -np.inf)
        argmax = masked.argmax(axis=1)  # (B, n_f)
        pooled = np.take_along_axis(masked, argmax[:, None, :], axis=1)[:, 0, :]
        pooled_parts.append(pooled)
        cache["per_width"][w] = {
            "flat": flat,
            "pre_positive": pre > 0.0,
            "argmax": argmax,
            "n_windows": flat.shape[1],
        }
    feats = np.concatenate(pooled_parts, axis=1)  # (B, total_filters)
    logits = feats @ params.out_weights.T + params.out_bias
    scores = _sigmoid(logits)
    cache["feats"] = feats
    cache["scores"] = scores
    return scores, cache


def forward(params: CnnParams, ids: np.ndarray) -> np.ndarray:
    """Score one id sequence (T,) or a batch (B, T); sigmoid outputs."""
    arr = np.asarray(ids)
    if arr.ndim == 1:
        scores, _ = _forward_batch(params, arr[None, :])
        return scores[0]
    scores, _ = _forward_batch(params, arr)
    return scores


def bce_loss(scores: np.ndarray, targets: np.ndarray) -> float:
    """Mean per-label binary cross-entropy with the documented epsilon."""
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    per = -(targets * np.log(scores + EPS) + (1.0 - targets) * np.log(1.0 - scores + EPS))
    return float(per.mean())


def loss_gradients(
    params: CnnParams, ids: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients for a batch.

    ids is (B, T) int, targets (B, L) in {0,1}. Gradients come back as a
    dict keyed like CnnParams.tensor_items(); the pad embedding row is
    pinned (its gradient is exactly zero because the forward pass never
    reads it).
    """
    ids = np.asarray(ids)
    targets = np.asarray(targets, dtype=np.float64)
    scores, cache = _forward_batch(params, ids)
    if targets.shape != scores.shape:
        raise ShapeMismatchError(
            f"targets shape {targets.shape} does not match scores {scores.shape}"
        )
    loss = bce_loss(scores, targets)

    n_total = scores.size
    dscores = (
        -(targets / (scores + EPS)) + (1.0 - targets) / (1.0 - scores + EPS)
    ) / n_total
    dlogits = dscores * scores * (1.0 - scores)  # (B, L)

    feats = cache["feats"]
    grads: dict[str, np.ndarray] = {
        "out_weights": dlogits.T @ feats,
        "out_bias": dlogits.sum(axis=0),
    }
    dfeats = dlogits @ params.out_weights  # (B, total_filters)

    batch, seq_len = ids.shape
    d = params.embeddings.shape[1]
    demb = np.zeros((batch, seq_len, d))
    offset = 0
    for w in params.widths:
        wc = cache["per_width"][w]
        n_f = params.conv_weights[w].shape[0]
        n_windows = wc["n_windows"]
        dpooled = dfeats[:, offset : offset + n_f]
        offset += n_f
        da = np.zeros((batch, n_windows, n_f))
        np.put_along_axis(da, wc["argmax"][:, None, :], dpooled[:, None, :], axis=1)
        dpre = da * wc["pre_positive"]
        flat = wc["flat"]
        grads[f"conv_w_{w}"] = np.einsum("bpf,bpk->fk", dpre, flat).reshape(n_f, w, d)
        grads[f"conv_b_{w}"] = dpre.sum(axis=(0, 1))
        dflat = dpre @ params.conv_weights[w].reshape(n_f, -1)  # (B, P, w*d)
        dwindows = dflat.reshape(batch, n_windows, w, d)
        for j in range(w):
            demb[:, j : j + n_windows, :] += dwindows[:, :, j, :]
    demb *= cache["real"][:, :, None]
    dembeddings = np.zeros_like(params.embeddings)
    np.add.at(dembeddings, ids.reshape(-1), demb.reshape(-1, d))
    dembeddings[PAD_ID] = 0.0
    grads["embeddings"] = dembeddings
    return loss, grads
