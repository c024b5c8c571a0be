"""Metrics, split protocol, threshold sweeps, and the feedback simulation.

Precision/recall are micro-averaged by default (macro available behind a
flag), swept over a threshold grid, and averaged over several reseeded
train/test iterations. The feedback experiment replays a pool of
verified mappings through the active-learning path and reports f1 per
iteration, starting from the no-feedback baseline at iteration 0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .corpus import RegulationControl, TechspecCheck, build_specification_text, preprocess
from .classifier import TrainConfig, train_model
from .classifier.model import TextCnnModel
from .errors import (
    DatasetTooSmallError,
    ModelNotTrainedError,
    PoolSizeMismatchError,
)
from .feedback import (
    FeedbackConfig,
    FeedbackRecord,
    LabeledExample,
    LearnerState,
    TrainingStore,
    maybe_retrain,
    submit_feedback,
)
from .hybrid import fuse
from .index import InvertedIndex
from .stopwords import DEFAULT_STOPWORDS

BACKENDS = ("search", "cnn", "hybrid")

DEFAULT_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass(frozen=True)
class EvalConfig:
    k: int = 3
    test_fraction: float = 0.15
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    seed: int = 0
    iterations: int = 5
    average: str = "micro"  # or "macro"
    max_hits: int = 20
    operating_threshold: float = 0.5  # f1 operating point for the feedback experiment

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("fold count k must be >= 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.average not in ("micro", "macro"):
            raise ValueError("average must be micro or macro")
        ts = tuple(self.thresholds)
        if not ts or any(not 0.0 <= t <= 1.0 for t in ts):
            raise ValueError("thresholds must lie in [0, 1]")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", ts)


@dataclass(frozen=True)
class MetricPoint:
    threshold: float
    backend: str
    precision: float
    recall: float
    f1: float
    support: int


def prf(predicted: set[str] | frozenset[str], truth: set[str] | frozenset[str]):
    """Precision, recall, f1 for one prediction/truth pair.

    Conventions for empty sets: precision is 1.0 when both are empty and
    0.0 when only the prediction is empty; recall is 1.0 for an empty
    truth set.
    """
    hit = len(set(predicted) & set(truth))
    if predicted:
        precision = hit / len(predicted)
    else:
        precision = 1.0 if not truth else 0.0
    recall = hit / len(truth) if truth else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def micro_prf(pairs: Iterable[tuple[set[str], set[str]]]):
    """Pooled precision/recall/f1 over many pairs."""
    hits = pred_total = truth_total = 0
    for predicted, truth in pairs:
        hits += len(set(predicted) & set(truth))
        pred_total += len(predicted)
        truth_total += len(truth)
    if pred_total:
        precision = hits / pred_total
    else:
        precision = 1.0 if truth_total == 0 else 0.0
    recall = hits / truth_total if truth_total else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def macro_prf(pairs: Iterable[tuple[set[str], set[str]]]):
    """Mean of per-pair precision/recall/f1."""
    rows = [prf(p, t) for p, t in pairs]
    if not rows:
        return 0.0, 0.0, 0.0
    arr = np.asarray(rows)
    return tuple(float(x) for x in arr.mean(axis=0))


def split_folds(
    data: Sequence, config: EvalConfig, seed: int | None = None
) -> tuple[list, list]:
    """Seeded random train/test partition; the test set holds
    round(test_fraction * n) items. Disjoint and covering."""
    if len(data) < config.k:
        raise DatasetTooSmallError(
            f"{len(data)} examples cannot be split into {config.k} folds"
        )
    rng = np.random.default_rng(config.seed if seed is None else seed)
    order = rng.permutation(len(data))
    n_test = round(config.test_fraction * len(data))
    test_idx = set(order[:n_test].tolist())
    train = [data[i] for i in range(len(data)) if i not in test_idx]
    test = [data[i] for i in sorted(test_idx)]
    return train, test


# ---------------------------------------------------------------------------
# Backend construction
# ---------------------------------------------------------------------------


def control_documents(controls: Iterable[RegulationControl]):
    """Each control specification becomes a searchable document tagged
    with its own id."""
    return [
        (
            preprocess(f"{c.title} {c.text}", DEFAULT_STOPWORDS),
            frozenset({c.control_id}),
            f"control:{c.control_id}",
        )
        for c in controls
    ]


def check_documents(checks: Iterable[TechspecCheck]):
    """Labeled techspec checks become documents carrying their mappings."""
    return [
        (
            preprocess(build_specification_text(c), DEFAULT_STOPWORDS),
            frozenset(c.labels),
            f"check:{c.check_id}",
        )
        for c in checks
        if c.labels
    ]


@dataclass
class Backends:
    """A matched (index, model) pair plus per-backend scorers."""

    index: InvertedIndex
    model: TextCnnModel | None
    max_hits: int = 20

    def score(self, backend: str, text: str) -> dict[str, float]:
        if backend == "search":
            return self._search_scores(text)
        if backend == "cnn":
            if self.model is None:
                raise ModelNotTrainedError("no trained model installed")
            return self.model.predict(text)
        if backend == "hybrid":
            cnn = self.model.predict(text) if self.model is not None else {}
            hits = self.index.search(preprocess(text, DEFAULT_STOPWORDS), self.max_hits)
            return {label: conf for label, (conf, _) in fuse(hits, cnn).items()}
        raise ValueError(f"unknown backend {backend!r}")

    def _search_scores(self, text: str) -> dict[str, float]:
        hits = self.index.search(preprocess(text, DEFAULT_STOPWORDS), self.max_hits)
        return {h.label: h.confidence for h in hits}


def build_backends(
    train_checks: list[TechspecCheck],
    controls: list[RegulationControl],
    train_config: TrainConfig,
    max_hits: int = 20,
    model_generation: int = 1,
) -> Backends:
    """Index the controls plus the labeled training fold, then train the
    classifier on that same fold."""
    index = InvertedIndex.build(control_documents(controls)).add_batch(
        check_documents(train_checks)
    )
    label_space = sorted(c.control_id for c in controls)
    texts = [build_specification_text(c) for c in train_checks]
    label_sets = [c.labels for c in train_checks]
    model = train_model(
        texts, label_sets, label_space, train_config, generation=model_generation
    ).model
    return Backends(index=index, model=model, max_hits=max_hits)


# ---------------------------------------------------------------------------
# Threshold sweep
# ---------------------------------------------------------------------------


def sweep_scored(
    scored: list[tuple[dict[str, float], frozenset[str]]],
    thresholds: Sequence[float],
    backend: str,
    average: str = "micro",
) -> list[MetricPoint]:
    """Turn per-example confidence dicts into metric points per threshold."""
    points = []
    averager = micro_prf if average == "micro" else macro_prf
    for t in thresholds:
        pairs = [
            ({label for label, conf in scores.items() if conf >= t}, set(truth))
            for scores, truth in scored
        ]
        precision, recall, f1 = averager(pairs)
        points.append(
            MetricPoint(
                threshold=t, backend=backend,
                precision=precision, recall=recall, f1=f1,
                support=len(scored),
            )
        )
    return points


def score_eval_set(
    backends: Backends, eval_checks: list[TechspecCheck], backend: str
) -> list[tuple[dict[str, float], frozenset[str]]]:
    """Confidence dict + truth labels for every eval check; computed once
    so a sweep only re-filters."""
    scored = []
    if backend == "cnn" and backends.model is not None:
        texts = [build_specification_text(c) for c in eval_checks]
        predictions = backends.model.predict_many(texts)
        return [(p, frozenset(c.labels)) for p, c in zip(predictions, eval_checks)]
    for check in eval_checks:
        scores = backends.score(backend, build_specification_text(check))
        scored.append((scores, frozenset(check.labels)))
    return scored


def threshold_sweep(
    checks: list[TechspecCheck],
    controls: list[RegulationControl],
    backends_to_run: Sequence[str],
    config: EvalConfig,
    train_config: TrainConfig,
) -> dict[str, list[MetricPoint]]:
    """Full sweep protocol: for each of config.iterations reseeded runs,
    split, build the backends on the train fold, score the test fold, and
    average the metric points across iterations."""
    for name in backends_to_run:
        if name not in BACKENDS:
            raise ValueError(f"unknown backend {name!r}")
    sums: dict[str, np.ndarray] = {
        name: np.zeros((len(config.thresholds), 3)) for name in backends_to_run
    }
    support = 0
    for iteration in range(config.iterations):
        train_fold, test_fold = split_folds(checks, config, seed=config.seed + iteration)
        built = build_backends(
            train_fold, controls,
            replace(train_config, seed=train_config.seed + iteration),
            max_hits=config.max_hits,
        )
        support = len(test_fold)
        for name in backends_to_run:
            scored = score_eval_set(built, test_fold, name)
            points = sweep_scored(scored, config.thresholds, name, config.average)
            sums[name] += np.asarray([(p.precision, p.recall, p.f1) for p in points])
    results: dict[str, list[MetricPoint]] = {}
    for name in backends_to_run:
        averaged = sums[name] / config.iterations
        results[name] = [
            MetricPoint(
                threshold=t, backend=name,
                precision=float(row[0]), recall=float(row[1]), f1=float(row[2]),
                support=support,
            )
            for t, row in zip(config.thresholds, averaged)
        ]
    return results


# ---------------------------------------------------------------------------
# Feedback simulation
# ---------------------------------------------------------------------------


@dataclass
class FeedbackExperimentResult:
    points: list[tuple[int, float]]  # (iteration, f1)
    retrains: int
    final_state: LearnerState


def simulate_feedback_experiment(
    base_train: list[TechspecCheck],
    feedback_pool: list[TechspecCheck],
    eval_set: list[TechspecCheck],
    controls: list[RegulationControl],
    feedback_config: FeedbackConfig,
    eval_config: EvalConfig,
    train_config: TrainConfig,
) -> FeedbackExperimentResult:
    """Replay a pool of verified mappings through the feedback path.

    Iteration 0 is the baseline trained on base_train alone; each later
    iteration submits y pool records (indexed immediately, classifier
    retrained at the boundary) and re-evaluates hybrid f1 on eval_set at
    the configured operating threshold.
    """
    y = feedback_config.y
    if not feedback_pool or len(feedback_pool) % y != 0:
        raise PoolSizeMismatchError(
            f"pool of {len(feedback_pool)} does not divide into iterations of y={y}"
        )
    label_space = sorted(c.control_id for c in controls)
    known = set(label_space)
    backends = build_backends(
        base_train, controls, train_config, max_hits=eval_config.max_hits
    )
    store = TrainingStore(
        base=[
            LabeledExample(
                text=build_specification_text(c), positives=frozenset(c.labels)
            )
            for c in base_train
        ]
    )
    state = LearnerState(current_model_generation=1)

    def hybrid_f1() -> float:
        scored = score_eval_set(backends, eval_set, "hybrid")
        t = eval_config.operating_threshold
        pairs = [
            ({label for label, conf in scores.items() if conf >= t}, set(truth))
            for scores, truth in scored
        ]
        averager = micro_prf if eval_config.average == "micro" else macro_prf
        return averager(pairs)[2]

    def trainer(examples: list[LabeledExample]) -> TextCnnModel:
        return train_model(
            [e.text for e in examples],
            [e.positives for e in examples],
            label_space,
            train_config,
            generation=state.current_model_generation + 1,
        ).model

    points = [(0, hybrid_f1())]
    retrains = 0
    iteration = 0
    for i, check in enumerate(feedback_pool):
        record = FeedbackRecord(
            feedback_id=f"pool:{check.check_id}",
            check_text=build_specification_text(check),
            accepted=frozenset(check.labels),
            rejected=frozenset(),
            submitted_at="",
            author="simulation",
        )
        state, backends.index = submit_feedback(
            state, record, backends.index, store, known
        )
        state, new_model = maybe_retrain(state, store, feedback_config, trainer)
        if new_model is not None:
            backends.model = new_model
            retrains += 1
        if (i + 1) % y == 0:
            iteration += 1
            points.append((iteration, hybrid_f1()))
    return FeedbackExperimentResult(points=points, retrains=retrains, final_state=state)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def metric_points_to_csv(results: dict[str, list[MetricPoint]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "backend", "precision", "recall", "f1", "support"])
    for backend in sorted(results):
        for p in results[backend]:
            writer.writerow(
                [
                    f"{p.threshold:.2f}", backend,
                    f"{p.precision:.6f}", f"{p.recall:.6f}", f"{p.f1:.6f}",
                    p.support,
                ]
            )
    return buf.getvalue()


def metric_points_to_json(results: dict[str, list[MetricPoint]]) -> str:
    payload = {
        backend: [
            {
                "threshold": p.threshold,
                "precision": p.precision,
                "recall": p.recall,
                "f1": p.f1,
                "support": p.support,
            }
            for p in points
        ]
        for backend, points in results.items()
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def feedback_series_to_csv(result: FeedbackExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "f1"])
    for iteration, f1 in result.points:
        writer.writerow([iteration, f"{f1:.6f}"])
    return buf.getvalue()
