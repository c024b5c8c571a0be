"""SME feedback capture and the active-learning retraining cadence.

Every verified sample goes into the index immediately; the classifier is
retrained from scratch on the cumulative dataset after every y new
samples. Rejections are kept as explicit negatives: the check still
becomes a training example, its positive set simply excludes the
rejected labels. The log is append-only JSONL, fsynced before a
submission is acknowledged, and replaying it reconstructs the exact
learner state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from .corpus import preprocess
from .errors import (
    DuplicateFeedbackIdError,
    InvalidFeedbackError,
    ParseError,
)
from .index import InvertedIndex
from .stopwords import StopwordList, DEFAULT_STOPWORDS


@dataclass(frozen=True)
class FeedbackRecord:
    """One SME verdict on a proposed mapping."""

    feedback_id: str
    check_text: str
    accepted: frozenset[str]
    rejected: frozenset[str]
    submitted_at: str = ""
    author: str = ""

    def validate(self, known_controls: Iterable[str] | None = None) -> None:
        if not self.feedback_id:
            raise InvalidFeedbackError("feedback_id must be non-empty")
        overlap = self.accepted & self.rejected
        if overlap:
            raise InvalidFeedbackError(
                f"labels both accepted and rejected: {sorted(overlap)}"
            )
        if not (self.accepted | self.rejected):
            raise InvalidFeedbackError("feedback carries no verdicts")
        if known_controls is not None:
            unknown = sorted((self.accepted | self.rejected) - set(known_controls))
            if unknown:
                raise InvalidFeedbackError(f"unknown controls: {unknown}")

    def to_json_dict(self) -> dict:
        return {
            "feedback_id": self.feedback_id,
            "check_text": self.check_text,
            "accepted": sorted(self.accepted),
            "rejected": sorted(self.rejected),
            "submitted_at": self.submitted_at,
            "author": self.author,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FeedbackRecord":
        return cls(
            feedback_id=str(data["feedback_id"]),
            check_text=str(data["check_text"]),
            accepted=frozenset(data.get("accepted", ())),
            rejected=frozenset(data.get("rejected", ())),
            submitted_at=str(data.get("submitted_at", "")),
            author=str(data.get("author", "")),
        )


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class FeedbackConfig:
    """Retrain interval: the classifier retrains after every y samples."""

    y: int = 50

    def __post_init__(self):
        if self.y < 1:
            raise ValueError("retrain interval y must be >= 1")


@dataclass(frozen=True)
class LearnerState:
    pending_since_retrain: int = 0
    total_feedback: int = 0
    current_model_generation: int = 0


@dataclass
class LabeledExample:
    text: str
    positives: frozenset[str]


@dataclass
class TrainingStore:
    """Base training data plus every feedback example, in arrival order."""

    base: list[LabeledExample] = field(default_factory=list)
    feedback: list[LabeledExample] = field(default_factory=list)

    def add_feedback(self, record: FeedbackRecord) -> None:
        self.feedback.append(
            LabeledExample(text=record.check_text, positives=frozenset(record.accepted))
        )

    def examples(self, feedback_limit: int | None = None) -> list[LabeledExample]:
        extra = self.feedback if feedback_limit is None else self.feedback[:feedback_limit]
        return list(self.base) + list(extra)


class FeedbackLog:
    """Append-only JSONL log; an append is fsynced before returning."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.seen_ids: set[str] = set()
        if self.path.exists():
            for record in self.replay():
                self.seen_ids.add(record.feedback_id)

    def append(self, record: FeedbackRecord) -> None:
        if record.feedback_id in self.seen_ids:
            raise DuplicateFeedbackIdError(
                f"feedback {record.feedback_id!r} already submitted"
            )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        line = json.dumps(record.to_json_dict(), ensure_ascii=False)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.seen_ids.add(record.feedback_id)

    def replay(self) -> list[FeedbackRecord]:
        if not self.path.exists():
            return []
        records = []
        for line_no, line in enumerate(
            self.path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                records.append(FeedbackRecord.from_json_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(f"corrupt feedback log entry: {exc}", line_no) from exc
        return records


def submit_feedback(
    state: LearnerState,
    record: FeedbackRecord,
    index: InvertedIndex,
    store: TrainingStore,
    known_controls: Iterable[str] | None = None,
    stopwords: StopwordList = DEFAULT_STOPWORDS,
    log: FeedbackLog | None = None,
) -> tuple[LearnerState, InvertedIndex]:
    """Apply one feedback record: log it, index accepted labels as a new
    document immediately, store the labeled example, bump the counters.

    Returns the new (state, index); the inputs are left untouched. Pass a
    log to make the record durable before any state changes."""
    record.validate(known_controls)
    if log is not None:
        log.append(record)
    if record.accepted:
        index = index.add_document(
            (
                preprocess(record.check_text, stopwords),
                frozenset(record.accepted),
                f"feedback:{record.feedback_id}",
            )
        )
    store.add_feedback(record)
    new_state = replace(
        state,
        pending_since_retrain=state.pending_since_retrain + 1,
        total_feedback=state.total_feedback + 1,
    )
    return new_state, index


def maybe_retrain(
    state: LearnerState,
    store: TrainingStore,
    config: FeedbackConfig,
    trainer: Callable[[list[LabeledExample]], object],
) -> tuple[LearnerState, object | None]:
    """Retrain when enough feedback accumulated, otherwise no-op.

    When pending_since_retrain >= y the trainer runs over the cumulative
    dataset (base training data plus all feedback examples), pending
    resets to zero, and the model generation increments. Trainer errors
    propagate so the caller can keep the previous model installed.
    """
    if state.pending_since_retrain < config.y:
        return state, None
    model = trainer(store.examples())
    new_state = replace(
        state,
        pending_since_retrain=0,
        current_model_generation=state.current_model_generation + 1,
    )
    return new_state, model
