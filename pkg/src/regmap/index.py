"""Embedded inverted index with BM25 relevance and per-query confidence.

The index is an immutable snapshot: mutations return a new index with an
incremented generation, so readers can keep searching a snapshot while a
single writer installs the next one. Relevance is BM25 with the Lucene
default constants (k1=1.2, b=0.75); confidence is the relevance divided
by the best relevance in the result set, so the top hit is always 1.0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import TokenStream
from .errors import (
    DuplicateDocIdError,
    EmptyCorpusError,
    EmptyIndexError,
    InvalidDocumentError,
    SnapshotFormatError,
    UnknownDocIdError,
)

K1 = 1.2
B = 0.75

INDEX_FORMAT_VERSION = 1

# A document entering the index: (tokens, label set, doc id).
Document = tuple[TokenStream, frozenset[str], str]


@dataclass(frozen=True)
class IndexedDocument:
    """One stored document with its mapping labels and term counts."""

    doc_id: str
    label_set: frozenset[str]
    token_counts: dict[str, int]
    length: int


@dataclass(frozen=True)
class SearchHit:
    """One aggregated result label with unbounded relevance and [0,1] confidence."""

    label: str
    relevance: float
    confidence: float


def _idf(doc_count: int, df: int) -> float:
    return math.log(1.0 + (doc_count - df + 0.5) / (df + 0.5))


@dataclass(frozen=True)
class InvertedIndex:
    """Immutable token -> postings index over labeled documents.

    postings maps token -> tuple of (doc_id, term count). Invariants:
    doc_count == len(doc_lengths), avg_doc_len is the mean document
    length, and generation increments on every mutation batch.
    """

    postings: dict[str, tuple[tuple[str, int], ...]]
    doc_lengths: dict[str, int]
    doc_labels: dict[str, frozenset[str]]
    doc_count: int
    avg_doc_len: float
    generation: int

    @classmethod
    def empty(cls) -> "InvertedIndex":
        return cls(
            postings={}, doc_lengths={}, doc_labels={},
            doc_count=0, avg_doc_len=0.0, generation=0,
        )

    @classmethod
    def build(cls, docs: Iterable[Document]) -> "InvertedIndex":
        """Batch-build an index; generation starts at 1."""
        docs = list(docs)
        if not docs:
            raise EmptyCorpusError("cannot build an index over zero documents")
        index = cls.empty()
        return index._with_docs(docs, generation=1)

    def add_document(self, doc: Document) -> "InvertedIndex":
        """Return a new index including doc; generation is incremented."""
        return self._with_docs([doc], generation=self.generation + 1)

    def add_batch(self, docs: Iterable[Document]) -> "InvertedIndex":
        """Add several documents as one mutation batch (generation +1)."""
        docs = list(docs)
        if not docs:
            return self
        return self._with_docs(docs, generation=self.generation + 1)

    def _with_docs(self, docs: list[Document], generation: int) -> "InvertedIndex":
        doc_lengths = dict(self.doc_lengths)
        doc_labels = dict(self.doc_labels)
        added: dict[str, list[tuple[str, int]]] = {}
        for tokens, label_set, doc_id in docs:
            if doc_id in doc_lengths:
                raise DuplicateDocIdError(f"document {doc_id!r} already indexed")
            if not label_set:
                raise InvalidDocumentError(
                    f"document {doc_id!r} carries no mapping labels"
                )
            counts: dict[str, int] = {}
            for token in tokens:
                counts[token] = counts.get(token, 0) + 1
            for token, tf in counts.items():
                added.setdefault(token, []).append((doc_id, tf))
            doc_lengths[doc_id] = len(tokens)
            doc_labels[doc_id] = frozenset(label_set)
        postings = dict(self.postings)
        for token, new_entries in added.items():
            postings[token] = postings.get(token, ()) + tuple(new_entries)
        doc_count = len(doc_lengths)
        avg_doc_len = sum(doc_lengths.values()) / doc_count
        return InvertedIndex(
            postings=postings,
            doc_lengths=doc_lengths,
            doc_labels=doc_labels,
            doc_count=doc_count,
            avg_doc_len=avg_doc_len,
            generation=generation,
        )

    def advanced_to(self, generation: int) -> "InvertedIndex":
        """Copy with a larger generation; used to keep counters monotone
        when a rebuilt snapshot replaces an older, higher-generation one."""
        if generation <= self.generation:
            return self
        return InvertedIndex(
            postings=self.postings,
            doc_lengths=self.doc_lengths,
            doc_labels=self.doc_labels,
            doc_count=self.doc_count,
            avg_doc_len=self.avg_doc_len,
            generation=generation,
        )

    def document(self, doc_id: str) -> IndexedDocument:
        if doc_id not in self.doc_lengths:
            raise UnknownDocIdError(f"unknown document {doc_id!r}")
        counts = {
            token: tf
            for token, plist in self.postings.items()
            for d, tf in plist
            if d == doc_id
        }
        return IndexedDocument(
            doc_id=doc_id,
            label_set=self.doc_labels[doc_id],
            token_counts=counts,
            length=self.doc_lengths[doc_id],
        )

    # -- scoring ------------------------------------------------------------

    def bm25_score(self, query: TokenStream, doc_id: str) -> float:
        """BM25 score of one document for a query.

        Sums idf(t) * tf * (k1+1) / (tf + k1 * (1 - b + b * len/avg_len))
        over the query tokens (duplicate query tokens contribute once per
        occurrence); 0.0 when no query term occurs in the document.
        """
        if doc_id not in self.doc_lengths:
            raise UnknownDocIdError(f"unknown document {doc_id!r}")
        length = self.doc_lengths[doc_id]
        score = 0.0
        for token in query:
            plist = self.postings.get(token)
            if not plist:
                continue
            tf = 0
            for d, count in plist:
                if d == doc_id:
                    tf = count
                    break
            if tf == 0:
                continue
            norm = tf + K1 * (1.0 - B + B * length / self.avg_doc_len)
            score += _idf(self.doc_count, len(plist)) * tf * (K1 + 1.0) / norm
        return score

    def search(self, query: TokenStream, max_hits: int) -> list[SearchHit]:
        """Score and rank control labels for a query.

        Every document with nonzero term overlap is scored; a label's
        relevance is the max over documents carrying it. Hits are sorted
        by relevance descending with control_id tiebreak and truncated to
        max_hits labels.
        """
        if self.doc_count == 0:
            raise EmptyIndexError("search against an empty index")
        if max_hits < 1:
            raise ValueError("max_hits must be >= 1")
        doc_scores: dict[str, float] = {}
        for token in query:
            plist = self.postings.get(token)
            if not plist:
                continue
            idf = _idf(self.doc_count, len(plist))
            for doc_id, tf in plist:
                norm = tf + K1 * (
                    1.0 - B + B * self.doc_lengths[doc_id] / self.avg_doc_len
                )
                contribution = idf * tf * (K1 + 1.0) / norm
                doc_scores[doc_id] = doc_scores.get(doc_id, 0.0) + contribution
        label_relevance: dict[str, float] = {}
        for doc_id, relevance in doc_scores.items():
            for label in self.doc_labels[doc_id]:
                if relevance > label_relevance.get(label, -1.0):
                    label_relevance[label] = relevance
        if not label_relevance:
            return []
        best = max(label_relevance.values())
        hits = [
            SearchHit(label=label, relevance=rel, confidence=rel / best)
            for label, rel in label_relevance.items()
        ]
        hits.sort(key=lambda h: (-h.relevance, h.label))
        return hits[:max_hits]

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the index as one versioned JSON file."""
        payload = {
            "format_version": INDEX_FORMAT_VERSION,
            "generation": self.generation,
            "doc_count": self.doc_count,
            "avg_doc_len": self.avg_doc_len,
            "doc_lengths": self.doc_lengths,
            "doc_labels": {d: sorted(ls) for d, ls in self.doc_labels.items()},
            "postings": {t: [[d, tf] for d, tf in plist] for t, plist in self.postings.items()},
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SnapshotFormatError(f"unreadable index file: {exc.msg}") from exc
        if payload.get("format_version") != INDEX_FORMAT_VERSION:
            raise SnapshotFormatError(
                f"unsupported index format version {payload.get('format_version')!r}"
            )
        return cls(
            postings={
                t: tuple((d, int(tf)) for d, tf in plist)
                for t, plist in payload["postings"].items()
            },
            doc_lengths={d: int(n) for d, n in payload["doc_lengths"].items()},
            doc_labels={d: frozenset(ls) for d, ls in payload["doc_labels"].items()},
            doc_count=int(payload["doc_count"]),
            avg_doc_len=float(payload["avg_doc_len"]),
            generation=int(payload["generation"]),
        )


def build_index(docs: Iterable[Document]) -> InvertedIndex:
    """Module-level alias for InvertedIndex.build."""
    return InvertedIndex.build(docs)
