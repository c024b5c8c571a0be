"""Independent reference implementations used as test oracles.

These deliberately avoid the engine's data structures: the BM25 reference
loops over raw token lists and recomputes every statistic per call, and
the CNN reference walks windows and filters with plain Python loops.
"""

from __future__ import annotations

import math

import numpy as np

K1 = 1.2
B = 0.75


def bm25_reference_score(
    doc_tokens: dict[str, list[str]],
    query: list[str],
    doc_id: str,
    k1: float = K1,
    b: float = B,
) -> float:
    """Score one document by brute force over the raw corpus."""
    n_docs = len(doc_tokens)
    avg_len = sum(len(toks) for toks in doc_tokens.values()) / n_docs
    tokens = doc_tokens[doc_id]
    score = 0.0
    for term in query:
        tf = tokens.count(term)
        if tf == 0:
            continue
        df = sum(1 for toks in doc_tokens.values() if term in toks)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        norm = tf + k1 * (1.0 - b + b * len(tokens) / avg_len)
        score += idf * tf * (k1 + 1.0) / norm
    return score


def bm25_reference_search(
    doc_tokens: dict[str, list[str]],
    doc_labels: dict[str, frozenset[str]],
    query: list[str],
    max_hits: int,
) -> list[tuple[str, float, float]]:
    """Rank labels by brute force: per-label max relevance, normalized.

    Returns (label, relevance, confidence) triples sorted like the engine.
    """
    label_rel: dict[str, float] = {}
    for doc_id, tokens in doc_tokens.items():
        if not any(t in tokens for t in query):
            continue
        rel = bm25_reference_score(doc_tokens, query, doc_id)
        for label in doc_labels[doc_id]:
            if rel > label_rel.get(label, -1.0):
                label_rel[label] = rel
    if not label_rel:
        return []
    best = max(label_rel.values())
    hits = sorted(
        ((label, rel, rel / best) for label, rel in label_rel.items()),
        key=lambda h: (-h[1], h[0]),
    )
    return hits[:max_hits]


def cnn_reference_forward(params, ids: np.ndarray, pad_id: int) -> np.ndarray:
    """Loop-based forward pass mirroring the documented architecture.

    ids is one sequence (T,). Embeddings of pad positions are treated as
    structurally zero; a convolution window participates in max pooling
    only if it lies entirely within real tokens. When no window does
    (sequence shorter than the width, or fully padded), the leading
    window participates instead; its pad positions contribute zero, so a
    pad-only input pools to relu(bias).
    """
    seq = [int(i) for i in ids]
    length = len(seq)
    real = [i != pad_id for i in seq]
    widths = sorted(params.conv_weights)
    pooled_parts = []
    for width in widths:
        weights = params.conv_weights[width]  # (n_f, w, d)
        bias = params.conv_biases[width]  # (n_f,)
        n_f, _, dim = weights.shape
        n_windows = length - width + 1
        window_values: list[list[float]] = []
        included: list[bool] = []
        for pos in range(n_windows):
            included.append(all(real[pos : pos + width]))
            values = []
            for f in range(n_f):
                acc = float(bias[f])
                for offset in range(width):
                    token_id = seq[pos + offset]
                    if token_id == pad_id:
                        continue
                    for k in range(dim):
                        acc += float(weights[f, offset, k]) * float(
                            params.embeddings[token_id, k]
                        )
                values.append(max(acc, 0.0))
            window_values.append(values)
        if not any(included):
            included[0] = True
        pooled = [
            max(window_values[pos][f] for pos in range(n_windows) if included[pos])
            for f in range(n_f)
        ]
        pooled_parts.extend(pooled)
    feats = np.array(pooled_parts, dtype=np.float64)
    logits = params.out_weights @ feats + params.out_bias
    return 1.0 / (1.0 + np.exp(-logits))
