"""Coverage and gap reporting over SME-accepted mappings.

Only accepted mappings count as evidence: a control is covered iff at
least one accepted mapping references it, everything else is a gap.
Unverified predictions never move the needle.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

from .corpus import RegulationControl
from .feedback import utc_now_iso


@dataclass(frozen=True)
class CoverageReport:
    """Partition of a regulation's controls into covered and gaps."""

    regulation_id: str
    covered: frozenset[str]
    gaps: frozenset[str]
    coverage_ratio: float
    per_family: dict[str, tuple[int, int]]  # family -> (covered, total)
    generated_at: str

    def to_json_dict(self) -> dict:
        return {
            "regulation_id": self.regulation_id,
            "covered": sorted(self.covered),
            "gaps": sorted(self.gaps),
            "coverage_ratio": self.coverage_ratio,
            "per_family": {
                family: {"covered": c, "total": t}
                for family, (c, t) in sorted(self.per_family.items())
            },
            "generated_at": self.generated_at,
        }


def coverage_report(
    regulation_id: str,
    controls: list[RegulationControl],
    accepted_mappings: Iterable[tuple[str, str]],
) -> CoverageReport:
    """Roll accepted (check_id, control_id) pairs up into a report.

    Mappings referencing controls outside the catalog are ignored so the
    covered/gaps partition always matches the current control set.
    """
    all_ids = {c.control_id for c in controls}
    covered = frozenset(
        control_id for _, control_id in accepted_mappings if control_id in all_ids
    )
    gaps = frozenset(all_ids - covered)
    per_family: dict[str, tuple[int, int]] = {}
    for control in controls:
        done, total = per_family.get(control.family, (0, 0))
        per_family[control.family] = (
            done + (1 if control.control_id in covered else 0),
            total + 1,
        )
    ratio = len(covered) / len(all_ids) if all_ids else 0.0
    return CoverageReport(
        regulation_id=regulation_id,
        covered=covered,
        gaps=gaps,
        coverage_ratio=ratio,
        per_family=per_family,
        generated_at=utc_now_iso(),
    )


def per_family_csv(report: CoverageReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["family", "covered", "total", "ratio"])
    for family, (covered, total) in sorted(report.per_family.items()):
        ratio = covered / total if total else 0.0
        writer.writerow([family, covered, total, f"{ratio:.4f}"])
    return buf.getvalue()
