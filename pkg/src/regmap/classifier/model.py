"""Trained-model bundle: vocabulary + parameters + label ordering,
with prediction and a deterministic versioned snapshot file.

Snapshot layout: one JSON header line (format version, config, stopword
version, vocabulary, label ordering, array dtypes/shapes) followed by the
raw tensor bytes concatenated in canonical order. Loading a snapshot
reproduces identical predictions; writing the same model twice produces
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..corpus import preprocess
from ..errors import EmptyTrainingSetError, SnapshotFormatError, UnknownLabelError
from ..stopwords import stopwords_for_version, EN_BASE_VERSION
from .network import CnnParams, forward, _forward_batch
from .training import TrainConfig, train
from .vocab import Vocabulary, build_vocabulary, vectorize

MODEL_FORMAT_VERSION = 1

CONFIDENCE_FLOOR = 0.01


@dataclass
class TrainResult:
    model: "TextCnnModel"
    loss_history: list[float]


@dataclass
class TextCnnModel:
    """Immutable-by-convention snapshot of one trained classifier."""

    config: TrainConfig
    vocab: Vocabulary
    labels: tuple[str, ...]
    params: CnnParams
    stopword_version: str = EN_BASE_VERSION
    generation: int = 1

    def predict(self, text: str, floor: float = CONFIDENCE_FLOOR) -> dict[str, float]:
        """Map text to {control_id: confidence}; sigmoid outputs are used
        directly and labels under the floor are omitted."""
        return self.predict_many([text], floor=floor)[0]

    def predict_many(
        self, texts: list[str], floor: float = CONFIDENCE_FLOOR
    ) -> list[dict[str, float]]:
        stopwords = stopwords_for_version(self.stopword_version)
        ids = np.stack(
            [
                vectorize(preprocess(t, stopwords), self.vocab, self.config.max_seq_len)
                for t in texts
            ]
        )
        scores, _ = _forward_batch(self.params, ids)
        results = []
        for row in scores:
            results.append(
                {
                    label: float(score)
                    for label, score in zip(self.labels, row)
                    if score >= floor
                }
            )
        return results

    def scores_for(self, text: str) -> np.ndarray:
        """Raw score vector in label order, no floor applied."""
        stopwords = stopwords_for_version(self.stopword_version)
        ids = vectorize(preprocess(text, stopwords), self.vocab, self.config.max_seq_len)
        return forward(self.params, ids)

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        arrays = self.params.tensor_items()
        header = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "regmap-model",
            "generation": self.generation,
            "stopword_version": self.stopword_version,
            "config": self.config.to_dict(),
            "labels": list(self.labels),
            "vocab": self.vocab.token_to_id,
            "arrays": [
                {"name": name, "dtype": str(a.dtype), "shape": list(a.shape)}
                for name, a in arrays
            ],
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8"))
            fh.write(b"\n")
            for _, a in arrays:
                fh.write(np.ascontiguousarray(a).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "TextCnnModel":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            blob = fh.read()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SnapshotFormatError(f"unreadable model header: {exc}") from exc
        if header.get("format_version") != MODEL_FORMAT_VERSION:
            raise SnapshotFormatError(
                f"unsupported model format version {header.get('format_version')!r}"
            )
        tensors: dict[str, np.ndarray] = {}
        offset = 0
        for spec_entry in header["arrays"]:
            dtype = np.dtype(spec_entry["dtype"])
            shape = tuple(spec_entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            nbytes = count * dtype.itemsize
            tensors[spec_entry["name"]] = (
                np.frombuffer(blob[offset : offset + nbytes], dtype=dtype)
                .reshape(shape)
                .copy()
            )
            offset += nbytes
        if offset != len(blob):
            raise SnapshotFormatError("model file has trailing or missing tensor bytes")
        widths = sorted(
            int(name.split("_")[-1])
            for name in tensors
            if name.startswith("conv_w_")
        )
        params = CnnParams(
            embeddings=tensors["embeddings"],
            conv_weights={w: tensors[f"conv_w_{w}"] for w in widths},
            conv_biases={w: tensors[f"conv_b_{w}"] for w in widths},
            out_weights=tensors["out_weights"],
            out_bias=tensors["out_bias"],
        )
        return cls(
            config=TrainConfig.from_dict(header["config"]),
            vocab=Vocabulary(token_to_id={str(k): int(v) for k, v in header["vocab"].items()}),
            labels=tuple(header["labels"]),
            params=params,
            stopword_version=header["stopword_version"],
            generation=int(header["generation"]),
        )


def train_model(
    texts: list[str],
    label_sets: list[frozenset[str] | set[str]],
    label_space: list[str] | tuple[str, ...],
    config: TrainConfig,
    stopword_version: str = EN_BASE_VERSION,
    generation: int = 1,
) -> TrainResult:
    """End-to-end training from raw texts: preprocess, build the
    vocabulary from the training fold only, vectorize, train."""
    if not texts:
        raise EmptyTrainingSetError("no training texts")
    if len(texts) != len(label_sets):
        raise ValueError("texts and label_sets must align")
    stopwords = stopwords_for_version(stopword_version)
    labels = tuple(label_space)
    label_index = {label: i for i, label in enumerate(labels)}
    unknown = sorted({l for ls in label_sets for l in ls if l not in label_index})
    if unknown:
        raise UnknownLabelError(f"labels outside the label space: {unknown[:5]}")
    streams = [preprocess(t, stopwords) for t in texts]
    vocab = build_vocabulary(streams, min_freq=config.min_freq)
    data = [
        (
            vectorize(stream, vocab, config.max_seq_len),
            {label_index[l] for l in label_set},
        )
        for stream, label_set in zip(streams, label_sets)
    ]
    params, history = train(data, config, n_labels=len(labels), vocab_size=vocab.size)
    model = TextCnnModel(
        config=config,
        vocab=vocab,
        labels=labels,
        params=params,
        stopword_version=stopword_version,
        generation=generation,
    )
    return TrainResult(model=model, loss_history=history)
