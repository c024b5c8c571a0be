"""Fusion of search hits and classifier scores into one confidence dict.

The default rule is union-with-max: every label either backend proposes
survives, at the higher of the two confidences. That makes the fused
label set a superset of each backend's at any threshold, which is what
gives the hybrid its recall dominance. A weighted-average alternative is
available behind the alpha switch for experimentation; it does not carry
the superset guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .corpus import preprocess
from .index import InvertedIndex, SearchHit
from .stopwords import StopwordList, DEFAULT_STOPWORDS

Provenance = Literal["search", "cnn", "both"]


@dataclass(frozen=True)
class MappingQuery:
    """One mapping request: free text against an ingested regulation."""

    text: str
    regulation_id: str
    threshold: float = 0.5
    max_hits: int = 20

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.max_hits < 1:
            raise ValueError("max_hits must be >= 1")


@dataclass(frozen=True)
class MappingEntry:
    control_id: str
    confidence: float
    provenance: Provenance


@dataclass(frozen=True)
class MappingResult:
    """Threshold-filtered, confidence-sorted mapping entries with the
    snapshot generations they were computed against."""

    entries: tuple[MappingEntry, ...]
    query: MappingQuery
    model_generation: int
    index_generation: int

    def to_json_dict(self) -> dict:
        return {
            "query": self.query.text,
            "regulation_id": self.query.regulation_id,
            "threshold": self.query.threshold,
            "results": [
                {
                    "control_id": e.control_id,
                    "confidence": e.confidence,
                    "provenance": e.provenance,
                }
                for e in self.entries
            ],
            "model_generation": self.model_generation,
            "index_generation": self.index_generation,
        }


def fuse(
    search_hits: list[SearchHit],
    cnn_scores: dict[str, float],
    alpha: float | None = None,
) -> dict[str, tuple[float, Provenance]]:
    """Combine both backends' label sets into {label: (confidence, provenance)}.

    Labels present in both take max(search, cnn) confidence, or the
    alpha-weighted average alpha*search + (1-alpha)*cnn when alpha is set.
    Labels only one backend proposes pass through unchanged.
    """
    fused: dict[str, tuple[float, Provenance]] = {
        hit.label: (hit.confidence, "search") for hit in search_hits
    }
    for label, confidence in cnn_scores.items():
        if label in fused:
            search_conf = fused[label][0]
            if alpha is None:
                combined = max(search_conf, confidence)
            else:
                combined = alpha * search_conf + (1.0 - alpha) * confidence
            fused[label] = (combined, "both")
        else:
            fused[label] = (confidence, "cnn")
    return fused


def map_check(
    query: MappingQuery,
    index: InvertedIndex,
    model=None,
    stopwords: StopwordList = DEFAULT_STOPWORDS,
    alpha: float | None = None,
) -> MappingResult:
    """Run the full mapping pipeline for one query.

    Searches the index and, when a trained model is installed, the
    classifier; fuses, drops entries below the query threshold, and sorts
    by confidence descending with control_id tiebreak. Before the first
    training completes the result degrades to search-only.
    """
    tokens = preprocess(query.text, stopwords)
    hits = index.search(tokens, query.max_hits)
    cnn_scores = model.predict(query.text) if model is not None else {}
    fused = fuse(hits, cnn_scores, alpha=alpha)
    entries = tuple(
        MappingEntry(control_id=label, confidence=conf, provenance=prov)
        for label, (conf, prov) in sorted(
            fused.items(), key=lambda kv: (-kv[1][0], kv[0])
        )
        if conf >= query.threshold
    )
    return MappingResult(
        entries=entries,
        query=query,
        model_generation=model.generation if model is not None else 0,
        index_generation=index.generation,
    )
