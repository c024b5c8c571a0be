"""Data model, file ingestion, and text preprocessing.

Regulation catalogs and techspec datasets arrive as JSONL or CSV
(RFC-4180, UTF-8, header row required). Preprocessing lowercases,
splits on any non-alphanumeric character, and drops stopwords, which
keeps digits as tokens: techspec text is parameter-heavy ("90 Days").
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import (
    DuplicateControlIdError,
    MissingFieldError,
    ParseError,
    UnknownLabelError,
)
from .stopwords import DEFAULT_STOPWORDS, StopwordList

# Any run of Unicode letters/digits; underscore counts as punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

CATALOG_FIELDS = ("regulation_id", "control_id", "family", "title", "text")
CHECK_FIELDS = ("check_id", "title", "description", "rationale", "fix", "source", "labels")


@dataclass(frozen=True)
class RegulationControl:
    """One control of a target regulation; the label space unit."""

    regulation_id: str
    control_id: str
    family: str
    title: str
    text: str


@dataclass(frozen=True)
class TechspecCheck:
    """One techspec check with optional ground-truth control labels."""

    check_id: str
    title: str
    description: str = ""
    rationale: str = ""
    fix: str = ""
    source: str = ""
    labels: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class TokenStream:
    """Lowercase tokens after stopword and punctuation removal.

    origin_len counts the tokens produced by splitting, before the
    stopword filter ran.
    """

    tokens: tuple[str, ...]
    origin_len: int

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def preprocess(text: str, stopwords: StopwordList = DEFAULT_STOPWORDS) -> TokenStream:
    """Tokenize, lowercase, and de-noise a piece of text.

    Splits on any non-alphanumeric character (so punctuation and runs of
    whitespace/control characters vanish), lowercases every token, and
    removes stopwords. Deterministic for a fixed stopword version; empty
    input yields an empty stream.
    """
    raw = _TOKEN_RE.findall(text.lower())
    kept = tuple(t for t in raw if t not in stopwords)
    return TokenStream(tokens=kept, origin_len=len(raw))


def build_specification_text(check: TechspecCheck) -> str:
    """Concatenate title, description, rationale, fix; empty fields skipped."""
    parts = [check.title, check.description, check.rationale, check.fix]
    return " ".join(p for p in parts if p)


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


def _iter_rows(text: str, fmt: str, expected: tuple[str, ...]) -> Iterable[tuple[int, dict]]:
    """Yield (line_no, row dict) pairs from JSONL or CSV content."""
    if fmt == "jsonl":
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line_no) from exc
            if not isinstance(row, dict):
                raise ParseError("row is not a JSON object", line_no)
            yield line_no, row
    elif fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raise ParseError("empty file, header row required", 1)
        missing = [c for c in expected if c not in reader.fieldnames and c != "labels"]
        if missing:
            raise ParseError(f"header is missing columns {missing}", 1)
        for line_no, row in enumerate(reader, start=2):
            if None in row:
                raise ParseError("row has more cells than the header", line_no)
            yield line_no, {k: (v if v is not None else "") for k, v in row.items()}
    else:
        raise ValueError(f"unknown format {fmt!r}; expected 'jsonl' or 'csv'")


def _require(row: dict, fields: tuple[str, ...], line_no: int) -> None:
    for name in fields:
        value = row.get(name)
        if value is None or (isinstance(value, str) and not value.strip()):
            raise MissingFieldError(name, line_no)


def load_control_catalog(
    path: str | Path,
    fmt: str = "jsonl",
    stopwords: StopwordList = DEFAULT_STOPWORDS,
) -> list[RegulationControl]:
    """Load and validate a regulation control catalog file."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_control_catalog(text, fmt, stopwords)


def parse_control_catalog(
    text: str,
    fmt: str = "jsonl",
    stopwords: StopwordList = DEFAULT_STOPWORDS,
) -> list[RegulationControl]:
    """Parse catalog content already in memory; see load_control_catalog."""
    controls: list[RegulationControl] = []
    seen: set[tuple[str, str]] = set()
    for line_no, row in _iter_rows(text, fmt, CATALOG_FIELDS):
        _require(row, ("regulation_id", "control_id", "text"), line_no)
        control = RegulationControl(
            regulation_id=str(row["regulation_id"]),
            control_id=str(row["control_id"]),
            family=str(row.get("family", "") or ""),
            title=str(row.get("title", "") or ""),
            text=str(row["text"]),
        )
        key = (control.regulation_id, control.control_id)
        if key in seen:
            raise DuplicateControlIdError(
                f"duplicate control_id {control.control_id!r} in "
                f"{control.regulation_id} (line {line_no})"
            )
        if not preprocess(control.text, stopwords).tokens:
            raise ParseError(
                f"control {control.control_id!r} has no content after preprocessing",
                line_no,
            )
        seen.add(key)
        controls.append(control)
    return controls


def load_techspec_dataset(
    path: str | Path,
    fmt: str = "jsonl",
    known_controls: set[str] | frozenset[str] | None = None,
    strict: bool = False,
) -> tuple[list[TechspecCheck], list[str]]:
    """Load a techspec check dataset.

    Returns (checks, warnings). Labels referencing controls outside
    known_controls are reported in the warnings list; under strict=True
    they raise UnknownLabelError instead. When known_controls is None no
    label resolution is attempted.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_techspec_dataset(text, fmt, known_controls, strict)


def parse_techspec_dataset(
    text: str,
    fmt: str = "jsonl",
    known_controls: set[str] | frozenset[str] | None = None,
    strict: bool = False,
) -> tuple[list[TechspecCheck], list[str]]:
    """Parse techspec dataset content already in memory."""
    checks: list[TechspecCheck] = []
    warnings: list[str] = []
    seen_ids: set[str] = set()
    for line_no, row in _iter_rows(text, fmt, CHECK_FIELDS):
        _require(row, ("check_id",), line_no)
        title = str(row.get("title", "") or "")
        description = str(row.get("description", "") or "")
        if not title.strip() and not description.strip():
            raise ParseError("one of title/description must be non-empty", line_no)
        labels = _parse_labels(row.get("labels"), fmt, line_no)
        check = TechspecCheck(
            check_id=str(row["check_id"]),
            title=title,
            description=description,
            rationale=str(row.get("rationale", "") or ""),
            fix=str(row.get("fix", "") or ""),
            source=str(row.get("source", "") or ""),
            labels=labels,
        )
        if check.check_id in seen_ids:
            raise ParseError(f"duplicate check_id {check.check_id!r}", line_no)
        seen_ids.add(check.check_id)
        if known_controls is not None:
            unknown = sorted(labels - set(known_controls))
            if unknown:
                message = (
                    f"line {line_no}: check {check.check_id!r} references "
                    f"unknown controls {unknown}"
                )
                if strict:
                    raise UnknownLabelError(message)
                warnings.append(message)
        checks.append(check)
    return checks, warnings


def _parse_labels(raw, fmt: str, line_no: int) -> frozenset[str]:
    if raw is None or raw == "":
        return frozenset()
    if fmt == "csv":
        if not isinstance(raw, str):
            raise ParseError("labels cell must be a string", line_no)
        return frozenset(part.strip() for part in raw.split(";") if part.strip())
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise ParseError("labels must be an array of strings", line_no)
    return frozenset(raw)


# ---------------------------------------------------------------------------
# Canonical serialization (JSONL round-trips byte-identically)
# ---------------------------------------------------------------------------


def controls_to_jsonl(controls: Iterable[RegulationControl]) -> str:
    lines = []
    for c in controls:
        lines.append(
            json.dumps(
                {
                    "regulation_id": c.regulation_id,
                    "control_id": c.control_id,
                    "family": c.family,
                    "title": c.title,
                    "text": c.text,
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def checks_to_jsonl(checks: Iterable[TechspecCheck]) -> str:
    lines = []
    for c in checks:
        lines.append(
            json.dumps(
                {
                    "check_id": c.check_id,
                    "title": c.title,
                    "description": c.description,
                    "rationale": c.rationale,
                    "fix": c.fix,
                    "source": c.source,
                    "labels": sorted(c.labels),
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")
