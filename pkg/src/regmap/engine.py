"""Stateful engine tying ingestion, mapping, feedback, and reporting together.

Persistence is append-only JSONL logs plus snapshot files under one data
directory; there is no external database. On startup the engine replays
what is on disk into the exact state a crashed process would have
reached: catalogs and training data rebuild the index, the feedback log
replays into counters and index additions, and the model snapshot is
reused when its generation matches the replayed retrain count (otherwise
one catch-up training run reproduces it, deterministically).

Readers (map, status, coverage) work on immutable snapshots and never
block on the single serialized writer path; retraining runs on a
background worker and installs the new model atomically.
"""

from __future__ import annotations

import json
import re
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .classifier import TrainConfig
from .classifier.model import TextCnnModel, train_model
from .corpus import (
    RegulationControl,
    TechspecCheck,
    build_specification_text,
    checks_to_jsonl,
    controls_to_jsonl,
    parse_control_catalog,
    parse_techspec_dataset,
)
from .coverage import CoverageReport, coverage_report
from .errors import RegmapError, UnknownLabelError, UnknownRegulationError
from .evaluation import check_documents, control_documents
from .feedback import (
    FeedbackConfig,
    FeedbackLog,
    FeedbackRecord,
    LabeledExample,
    LearnerState,
    TrainingStore,
    submit_feedback,
    utc_now_iso,
)
from .hybrid import MappingQuery, MappingResult, map_check
from .index import InvertedIndex

_REGULATION_ID_RE = re.compile(r"^[A-Za-z0-9._()\- ]+$")


class RegulationExistsError(RegmapError):
    """Re-ingest of an existing regulation without replace=true."""


@dataclass(frozen=True)
class EngineConfig:
    data_dir: Path
    feedback: FeedbackConfig = FeedbackConfig()
    train: TrainConfig = TrainConfig()
    default_threshold: float = 0.5
    fusion_alpha: float | None = None
    auth_token: str | None = None
    async_retrain: bool = False

    def to_dict(self) -> dict:
        return {
            "feedback_y": self.feedback.y,
            "train": self.train.to_dict(),
            "default_threshold": self.default_threshold,
            "fusion_alpha": self.fusion_alpha,
        }

    @classmethod
    def from_dict(cls, data: dict, data_dir: Path, **overrides) -> "EngineConfig":
        return cls(
            data_dir=data_dir,
            feedback=FeedbackConfig(y=int(data.get("feedback_y", 50))),
            train=TrainConfig.from_dict(data["train"]) if "train" in data else TrainConfig(),
            default_threshold=float(data.get("default_threshold", 0.5)),
            fusion_alpha=data.get("fusion_alpha"),
            **overrides,
        )


@dataclass
class SystemStatus:
    regulations_loaded: int
    index_generation: int
    model_generation: int
    pending_feedback: int
    total_feedback: int
    uptime_seconds: float
    regulations: dict[str, dict]

    def to_json_dict(self) -> dict:
        return {
            "regulations_loaded": self.regulations_loaded,
            "index_generation": self.index_generation,
            "model_generation": self.model_generation,
            "pending_feedback": self.pending_feedback,
            "total_feedback": self.total_feedback,
            "uptime_seconds": self.uptime_seconds,
            "regulations": self.regulations,
        }


@dataclass
class RegulationState:
    regulation_id: str
    controls: list[RegulationControl]
    checks: list[TechspecCheck] = field(default_factory=list)
    index: InvertedIndex = field(default_factory=InvertedIndex.empty)
    model: TextCnnModel | None = None
    learner: LearnerState = field(default_factory=LearnerState)
    store: TrainingStore = field(default_factory=TrainingStore)
    log: FeedbackLog | None = None
    accepted_mappings: list[tuple[str, str]] = field(default_factory=list)
    base_train_count: int = 0
    next_model_generation: int = 1

    @property
    def label_space(self) -> list[str]:
        return sorted(c.control_id for c in self.controls)

    @property
    def known_controls(self) -> set[str]:
        return {c.control_id for c in self.controls}


def _atomic_write(path: Path, data: str | bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    if isinstance(data, str):
        tmp.write_text(data, encoding="utf-8")
    else:
        tmp.write_bytes(data)
    tmp.replace(path)


class Engine:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.data_dir = Path(config.data_dir)
        self._write_lock = threading.Lock()
        self._regs: dict[str, RegulationState] = {}
        self._started = time.monotonic()
        self._executor: ThreadPoolExecutor | None = (
            ThreadPoolExecutor(max_workers=1) if config.async_retrain else None
        )
        self._pending_jobs: list[Future] = []
        for name in ("catalogs", "training", "feedback", "models", "reports", "state"):
            (self.data_dir / name).mkdir(parents=True, exist_ok=True)
        self._load_or_write_config()
        for catalog_path in sorted((self.data_dir / "catalogs").glob("*.jsonl")):
            self._load_regulation(catalog_path.stem)

    # -- startup --------------------------------------------------------------

    def _load_or_write_config(self) -> None:
        path = self.data_dir / "config.json"
        if path.exists():
            persisted = json.loads(path.read_text(encoding="utf-8"))
            self.config = EngineConfig.from_dict(
                persisted,
                data_dir=self.data_dir,
                auth_token=self.config.auth_token,
                async_retrain=self.config.async_retrain,
            )
        else:
            _atomic_write(path, json.dumps(self.config.to_dict(), indent=2, sort_keys=True))

    def _paths(self, regulation_id: str) -> dict[str, Path]:
        return {
            "catalog": self.data_dir / "catalogs" / f"{regulation_id}.jsonl",
            "training": self.data_dir / "training" / f"{regulation_id}.jsonl",
            "feedback": self.data_dir / "feedback" / f"{regulation_id}.jsonl",
            "model": self.data_dir / "models" / f"{regulation_id}.model",
            "state": self.data_dir / "state" / f"{regulation_id}.json",
        }

    def _load_regulation(self, regulation_id: str) -> None:
        paths = self._paths(regulation_id)
        controls = parse_control_catalog(
            paths["catalog"].read_text(encoding="utf-8"), "jsonl"
        )
        state = RegulationState(regulation_id=regulation_id, controls=controls)
        if paths["training"].exists():
            checks, _ = parse_techspec_dataset(
                paths["training"].read_text(encoding="utf-8"), "jsonl",
                known_controls=state.known_controls,
            )
            state.checks = checks
        if paths["state"].exists():
            persisted = json.loads(paths["state"].read_text(encoding="utf-8"))
            state.base_train_count = int(persisted.get("base_train_count", 0))
        state.index = InvertedIndex.build(control_documents(controls))
        if state.checks:
            state.index = state.index.add_batch(check_documents(state.checks))
        state.store = TrainingStore(
            base=[
                LabeledExample(
                    text=build_specification_text(c), positives=frozenset(c.labels)
                )
                for c in state.checks
                if c.labels
            ]
        )
        if paths["model"].exists():
            state.model = TextCnnModel.load(paths["model"])
        state.log = FeedbackLog(paths["feedback"])
        self._replay_feedback(state)
        self._regs[regulation_id] = state

    def _replay_feedback(self, state: RegulationState) -> None:
        records = state.log.replay() if state.log else []
        learner = LearnerState(
            current_model_generation=state.model.generation if state.model else 0
        )
        for record in records:
            learner, state.index = submit_feedback(
                learner, record, state.index, state.store, state.known_controls
            )
            for control_id in sorted(record.accepted):
                state.accepted_mappings.append((record.feedback_id, control_id))
        n = learner.total_feedback
        y = self.config.feedback.y
        boundaries = n // y
        expected_generation = state.base_train_count + boundaries
        if expected_generation > 0 and (
            state.model is None or state.model.generation != expected_generation
        ):
            # crash between a retrain boundary and the snapshot write:
            # one catch-up training reproduces the exact model
            try:
                model, _ = self._train_snapshot(
                    state, state.store.examples(feedback_limit=boundaries * y),
                    expected_generation,
                )
                self._install_model(state, model)
            except RegmapError as exc:
                self._event("replay_train_failed", state.regulation_id, error=str(exc))
        state.learner = replace(
            learner,
            pending_since_retrain=n - boundaries * y,
            current_model_generation=state.model.generation if state.model else 0,
        )
        state.next_model_generation = state.learner.current_model_generation + 1

    # -- shared helpers ---------------------------------------------------------

    def _state(self, regulation_id: str) -> RegulationState:
        try:
            return self._regs[regulation_id]
        except KeyError:
            raise UnknownRegulationError(
                f"regulation {regulation_id!r} has not been ingested"
            ) from None

    def known_controls(self, regulation_id: str) -> set[str]:
        return self._state(regulation_id).known_controls

    def regulations(self) -> list[str]:
        return sorted(self._regs)

    def _event(self, event_type: str, regulation_id: str, **details) -> None:
        payload = {
            "ts": utc_now_iso(),
            "type": event_type,
            "regulation_id": regulation_id,
            **details,
        }
        with open(self.data_dir / "events.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, ensure_ascii=False) + "\n")

    def _train_snapshot(
        self, state: RegulationState, examples: list[LabeledExample], generation: int
    ) -> tuple[TextCnnModel, float]:
        result = train_model(
            [e.text for e in examples],
            [e.positives for e in examples],
            state.label_space,
            self.config.train,
            generation=generation,
        )
        return result.model, result.loss_history[-1]

    def _install_model(self, state: RegulationState, model: TextCnnModel) -> None:
        # snapshot first, then swap the in-memory reference
        paths = self._paths(state.regulation_id)
        tmp = paths["model"].with_suffix(".model.tmp")
        model.save(tmp)
        tmp.replace(paths["model"])
        state.model = model

    def _persist_state_file(self, state: RegulationState) -> None:
        paths = self._paths(state.regulation_id)
        _atomic_write(
            paths["state"],
            json.dumps({"base_train_count": state.base_train_count}, sort_keys=True),
        )

    # -- ingestion ----------------------------------------------------------------

    def ingest_catalog(
        self, regulation_id: str, content: str, fmt: str = "jsonl", replace_existing: bool = False
    ) -> dict:
        if not _REGULATION_ID_RE.match(regulation_id):
            raise RegmapError(f"invalid regulation_id {regulation_id!r}")
        with self._write_lock:
            if regulation_id in self._regs and not replace_existing:
                raise RegulationExistsError(
                    f"regulation {regulation_id!r} already ingested; pass replace=true"
                )
            controls = parse_control_catalog(content, fmt)
            for control in controls:
                if control.regulation_id != regulation_id:
                    raise RegmapError(
                        f"row regulation_id {control.regulation_id!r} does not match "
                        f"{regulation_id!r}"
                    )
            paths = self._paths(regulation_id)
            previous = self._regs.get(regulation_id)
            if previous is not None:
                # replacing the catalog invalidates everything derived from it
                for key in ("training", "feedback", "model", "state"):
                    paths[key].unlink(missing_ok=True)
            _atomic_write(paths["catalog"], controls_to_jsonl(controls))
            state = RegulationState(regulation_id=regulation_id, controls=controls)
            state.index = InvertedIndex.build(control_documents(controls))
            if previous is not None:
                state.index = state.index.advanced_to(previous.index.generation + 1)
            state.log = FeedbackLog(paths["feedback"])
            self._regs[regulation_id] = state
            self._event("ingest", regulation_id, controls=len(controls))
            # parsing is all-or-nothing (any bad row fails the request),
            # so a successful ingest never has partially rejected rows
            return {
                "regulation_id": regulation_id,
                "loaded": len(controls),
                "rejected": 0,
                "warnings": [],
            }

    def train(
        self,
        regulation_id: str,
        checks: list[TechspecCheck],
        config_overrides: dict | None = None,
    ) -> dict:
        with self._write_lock:
            state = self._state(regulation_id)
            labeled = [c for c in checks if c.labels]
            unknown = sorted(
                {l for c in labeled for l in c.labels} - state.known_controls
            )
            if unknown:
                raise UnknownLabelError(
                    f"training labels not in catalog: {unknown[:8]}"
                )
            if config_overrides:
                self.config = replace(
                    self.config, train=self.config.train.override(**config_overrides)
                )
            paths = self._paths(regulation_id)
            state.base_train_count += 1
            self._persist_state_file(state)
            _atomic_write(paths["training"], checks_to_jsonl(checks))
            state.checks = checks
            index = InvertedIndex.build(control_documents(state.controls)).add_batch(
                check_documents(labeled)
            )
            state.index = index.advanced_to(state.index.generation + 1)
            state.store = TrainingStore(
                base=[
                    LabeledExample(
                        text=build_specification_text(c), positives=frozenset(c.labels)
                    )
                    for c in labeled
                ]
            )
            generation = state.next_model_generation
            state.next_model_generation += 1
            model, final_loss = self._train_snapshot(state, state.store.examples(), generation)
            self._install_model(state, model)
            state.learner = replace(state.learner, current_model_generation=generation)
            self._event(
                "train", regulation_id,
                generation=generation, examples=len(labeled),
                skipped_unlabeled=len(checks) - len(labeled),
                final_loss=final_loss,
            )
            return {
                "regulation_id": regulation_id,
                "trained_on": len(labeled),
                "skipped_unlabeled": len(checks) - len(labeled),
                "model_generation": generation,
                "index_generation": state.index.generation,
            }

    # -- mapping ----------------------------------------------------------------

    def map_query(self, query: MappingQuery) -> MappingResult:
        state = self._state(query.regulation_id)
        index, model = state.index, state.model  # snapshot pair
        return map_check(query, index, model, alpha=self.config.fusion_alpha)

    # -- feedback ----------------------------------------------------------------

    def submit_feedback(self, regulation_id: str, record: FeedbackRecord) -> dict:
        with self._write_lock:
            state = self._state(regulation_id)
            if not record.submitted_at:
                record = replace(record, submitted_at=utc_now_iso())
            learner, index = submit_feedback(
                state.learner, record, state.index, state.store,
                state.known_controls, log=state.log,
            )
            state.learner, state.index = learner, index
            for control_id in sorted(record.accepted):
                state.accepted_mappings.append((record.feedback_id, control_id))
            self._event(
                "feedback", regulation_id,
                feedback_id=record.feedback_id,
                accepted=sorted(record.accepted), rejected=sorted(record.rejected),
            )
            retrain_scheduled = False
            if state.learner.pending_since_retrain >= self.config.feedback.y:
                consumed = state.learner.total_feedback
                examples = state.store.examples(feedback_limit=consumed)
                generation = state.next_model_generation
                state.next_model_generation += 1
                state.learner = replace(state.learner, pending_since_retrain=0)
                retrain_scheduled = True
                if self._executor is not None:
                    self._pending_jobs.append(
                        self._executor.submit(
                            self._retrain_job, regulation_id, examples, generation
                        )
                    )
                else:
                    self._retrain_job_locked(state, examples, generation)
            return {
                "accepted": True,
                "feedback_id": record.feedback_id,
                "pending": state.learner.pending_since_retrain,
                "total_feedback": state.learner.total_feedback,
                "model_generation": state.learner.current_model_generation,
                "retrain_scheduled": retrain_scheduled,
            }

    def _retrain_job(self, regulation_id: str, examples, generation: int) -> None:
        # runs on the worker thread: train off-lock, install under the lock
        state = self._regs[regulation_id]
        try:
            model, final_loss = self._train_snapshot(state, examples, generation)
        except RegmapError as exc:
            self._event("retrain_failed", regulation_id, generation=generation, error=str(exc))
            return
        with self._write_lock:
            self._install_model(state, model)
            state.learner = replace(state.learner, current_model_generation=generation)
        self._event(
            "retrain", regulation_id,
            generation=generation, examples=len(examples), final_loss=final_loss,
        )

    def _retrain_job_locked(self, state: RegulationState, examples, generation: int) -> None:
        try:
            model, final_loss = self._train_snapshot(state, examples, generation)
        except RegmapError as exc:
            self._event(
                "retrain_failed", state.regulation_id,
                generation=generation, error=str(exc),
            )
            return
        self._install_model(state, model)
        state.learner = replace(state.learner, current_model_generation=generation)
        self._event(
            "retrain", state.regulation_id,
            generation=generation, examples=len(examples), final_loss=final_loss,
        )

    def wait_for_retrains(self, timeout: float = 300.0) -> None:
        deadline = time.monotonic() + timeout
        for job in list(self._pending_jobs):
            job.result(timeout=max(0.0, deadline - time.monotonic()))
        self._pending_jobs = [j for j in self._pending_jobs if not j.done()]

    # -- reporting ----------------------------------------------------------------

    def coverage(self, regulation_id: str) -> CoverageReport:
        state = self._state(regulation_id)
        return coverage_report(regulation_id, state.controls, list(state.accepted_mappings))

    def stored_report(self, experiment: str) -> dict:
        path = self.data_dir / "reports" / f"{experiment}.json"
        if not path.exists():
            raise RegmapError(f"no stored report named {experiment!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def save_report(self, experiment: str, payload: dict) -> Path:
        path = self.data_dir / "reports" / f"{experiment}.json"
        _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True))
        return path

    def status(self) -> SystemStatus:
        regulations = {}
        for reg_id, state in sorted(self._regs.items()):
            regulations[reg_id] = {
                "controls": len(state.controls),
                "training_checks": len(state.checks),
                "index_generation": state.index.generation,
                "model_generation": state.learner.current_model_generation,
                "pending_feedback": state.learner.pending_since_retrain,
                "total_feedback": state.learner.total_feedback,
            }
        return SystemStatus(
            regulations_loaded=len(self._regs),
            index_generation=sum(r["index_generation"] for r in regulations.values()),
            model_generation=sum(r["model_generation"] for r in regulations.values()),
            pending_feedback=sum(r["pending_feedback"] for r in regulations.values()),
            total_feedback=sum(r["total_feedback"] for r in regulations.values()),
            uptime_seconds=time.monotonic() - self._started,
            regulations=regulations,
        )

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
