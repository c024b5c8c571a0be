"""Figure rendering for the report paths; files only, no interactive UI."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import FeedbackExperimentResult, MetricPoint

_BACKEND_STYLE = {
    "search": {"color": "#1f77b4", "marker": "o"},
    "cnn": {"color": "#d62728", "marker": "s"},
    "hybrid": {"color": "#2ca02c", "marker": "^"},
}


def plot_threshold_sweep(
    results: dict[str, list[MetricPoint]], path: str | Path
) -> Path:
    """Two-panel figure: precision and recall vs confidence threshold,
    one curve per backend."""
    fig, (ax_p, ax_r) = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
    for backend in sorted(results):
        points = results[backend]
        style = _BACKEND_STYLE.get(backend, {})
        thresholds = [p.threshold for p in points]
        ax_p.plot(thresholds, [p.precision for p in points], label=backend, **style)
        ax_r.plot(thresholds, [p.recall for p in points], label=backend, **style)
    ax_p.set_title("precision")
    ax_r.set_title("recall")
    for ax in (ax_p, ax_r):
        ax.set_xlabel("confidence threshold")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.3)
    ax_p.set_ylabel("score")
    ax_p.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out)
    plt.close(fig)
    return out


def plot_feedback_series(result: FeedbackExperimentResult, path: str | Path) -> Path:
    """f1 per feedback iteration; iteration 0 is the no-feedback baseline."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    iterations = [i for i, _ in result.points]
    f1s = [f1 for _, f1 in result.points]
    ax.plot(iterations, f1s, marker="o", color="#2ca02c")
    ax.set_xlabel("feedback iteration")
    ax.set_ylabel("f1")
    ax.set_xticks(iterations)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out)
    plt.close(fig)
    return out
