"""Operator CLI: ingestion, training, one-shot mapping, feedback,
experiments with CSV/SVG reports, coverage, and the HTTP server.

stdout carries data (tables, or JSON under --json); diagnostics go to
stderr. Exit codes: 0 success, 1 domain error, 2 usage error. Defaults
can come from a key=value config file and the DATA_DIR environment
variable; explicit flags win.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .classifier import TrainConfig
from .corpus import (
    load_control_catalog,
    load_techspec_dataset,
)
from .engine import Engine, EngineConfig
from .errors import RegmapError
from .evaluation import (
    EvalConfig,
    feedback_series_to_csv,
    metric_points_to_csv,
    metric_points_to_json,
    simulate_feedback_experiment,
    split_folds,
    threshold_sweep,
)
from .feedback import FeedbackConfig, FeedbackRecord
from .hybrid import MappingQuery

DEFAULT_DATA_DIR = "regmap-data"

_CONFIG_KEYS = {
    "data_dir": str,
    "default_threshold": float,
    "y": int,
    "seed": int,
    "epochs": int,
    "d": int,
    "n_filters": int,
    "batch_size": int,
    "learning_rate": float,
    "max_seq_len": int,
    "min_freq": int,
}


def _parse_config_file(path: Path) -> dict:
    values: dict = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise click.UsageError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = _CONFIG_KEYS[key](value.strip())
    return values


class CliContext:
    def __init__(self, data_dir: Path, file_values: dict):
        self.data_dir = data_dir
        self.file_values = file_values

    def train_config(self, **overrides) -> TrainConfig:
        base = TrainConfig()
        file_overrides = {
            k: v for k, v in self.file_values.items()
            if k in ("seed", "epochs", "d", "n_filters", "batch_size",
                     "learning_rate", "max_seq_len", "min_freq")
        }
        merged = {**file_overrides, **{k: v for k, v in overrides.items() if v is not None}}
        return base.override(**merged)

    def engine(self, async_retrain: bool = False, token: str | None = None) -> Engine:
        return EngineFactory.build(self, async_retrain=async_retrain, token=token)


class EngineFactory:
    @staticmethod
    def build(ctx: CliContext, async_retrain: bool, token: str | None) -> Engine:
        return Engine(
            EngineConfig(
                data_dir=ctx.data_dir,
                feedback=FeedbackConfig(y=int(ctx.file_values.get("y", 50))),
                train=ctx.train_config(),
                default_threshold=float(ctx.file_values.get("default_threshold", 0.5)),
                auth_token=token,
                async_retrain=async_retrain,
            )
        )


def _threshold_arg(ctx, param, value):
    if value is None:
        return None
    if not 0.0 <= value <= 1.0:
        raise click.BadParameter("threshold must lie in [0, 1]")
    return value


def _echo_data(payload, as_json: bool, human: str):
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        click.echo(human)


def _run(fn):
    try:
        return fn()
    except RegmapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@click.group()
@click.option(
    "--data-dir", envvar="DATA_DIR", type=click.Path(path_type=Path), default=None,
    help="engine state directory (env: DATA_DIR)",
)
@click.option(
    "--config", "config_file", type=click.Path(exists=True, path_type=Path), default=None,
    help="key=value defaults file",
)
@click.pass_context
def main(ctx, data_dir, config_file):
    """Map techspec checks to regulation controls with search + CNN."""
    file_values = _parse_config_file(config_file) if config_file else {}
    resolved = data_dir or Path(file_values.get("data_dir", DEFAULT_DATA_DIR))
    ctx.obj = CliContext(data_dir=Path(resolved), file_values=file_values)


@main.command()
@click.option("--regulation", required=True)
@click.option("--catalog", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl")
@click.option("--replace", is_flag=True, default=False)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def ingest(ctx, regulation, catalog, fmt, replace, as_json):
    """Load a regulation control catalog and index it."""

    def action():
        engine = ctx.engine()
        summary = engine.ingest_catalog(
            regulation, Path(catalog).read_text(encoding="utf-8"), fmt,
            replace_existing=replace,
        )
        _echo_data(
            summary, as_json,
            f"loaded {summary['loaded']} controls into {regulation}",
        )

    _run(action)


@main.command()
@click.option("--regulation", required=True)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl")
@click.option("--strict/--no-strict", default=False, help="fail on unresolvable labels")
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def train(ctx, regulation, data_path, fmt, strict, epochs, seed, learning_rate, as_json):
    """Train the classifier on a labeled techspec dataset."""

    def action():
        engine = ctx.engine()
        checks, warnings = load_techspec_dataset(
            data_path, fmt, known_controls=engine.known_controls(regulation), strict=strict
        )
        for warning in warnings:
            click.echo(f"warning: {warning}", err=True)
        summary = engine.train(
            regulation, checks,
            config_overrides={"epochs": epochs, "seed": seed, "learning_rate": learning_rate},
        )
        _echo_data(
            summary, as_json,
            f"trained generation {summary['model_generation']} on "
            f"{summary['trained_on']} labeled checks "
            f"({summary['skipped_unlabeled']} unlabeled skipped)",
        )

    _run(action)


@main.command(name="map")
@click.option("--text", required=True)
@click.option("--regulation", required=True)
@click.option("--threshold", type=float, default=None, callback=_threshold_arg)
@click.option("--max-hits", type=int, default=20)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def map_cmd(ctx, text, regulation, threshold, max_hits, as_json):
    """Map one techspec text to ranked regulation controls."""

    def action():
        engine = ctx.engine()
        query = MappingQuery(
            text=text,
            regulation_id=regulation,
            threshold=threshold if threshold is not None else engine.config.default_threshold,
            max_hits=max_hits,
        )
        result = engine.map_query(query)
        if as_json:
            click.echo(json.dumps(result.to_json_dict(), indent=2, sort_keys=True))
            return
        if not result.entries:
            click.echo("no controls above the threshold")
            return
        width = max(len(e.control_id) for e in result.entries)
        click.echo(f"{'control':<{width}}  confidence  provenance")
        for e in result.entries:
            click.echo(f"{e.control_id:<{width}}  {e.confidence:>10.4f}  {e.provenance}")

    _run(action)


@main.command()
@click.option("--regulation", required=True)
@click.option("--id", "feedback_id", required=True)
@click.option("--text", required=True)
@click.option("--accept", default="", help="comma-separated control ids")
@click.option("--reject", default="", help="comma-separated control ids")
@click.option("--author", default="")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def feedback(ctx, regulation, feedback_id, text, accept, reject, author, as_json):
    """Record an SME verdict; retrains inline when the interval fills."""

    def action():
        engine = ctx.engine()
        record = FeedbackRecord(
            feedback_id=feedback_id,
            check_text=text,
            accepted=frozenset(x.strip() for x in accept.split(",") if x.strip()),
            rejected=frozenset(x.strip() for x in reject.split(",") if x.strip()),
            author=author,
        )
        ack = engine.submit_feedback(regulation, record)
        _echo_data(
            ack, as_json,
            f"recorded {feedback_id}: pending {ack['pending']}, "
            f"model generation {ack['model_generation']}",
        )

    _run(action)


@main.command()
@click.option("--regulation", required=True)
@click.option("--family-csv", type=click.Path(path_type=Path), default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def coverage(ctx, regulation, family_csv, as_json):
    """Coverage and gap report over accepted mappings."""

    def action():
        from .coverage import per_family_csv

        engine = ctx.engine()
        report = engine.coverage(regulation)
        if family_csv is not None:
            Path(family_csv).write_text(per_family_csv(report), encoding="utf-8")
            click.echo(f"wrote {family_csv}", err=True)
        human = (
            f"{regulation}: {len(report.covered)}/{len(report.covered) + len(report.gaps)} "
            f"controls covered ({report.coverage_ratio:.1%}); "
            f"{len(report.gaps)} gaps"
        )
        _echo_data(report.to_json_dict(), as_json, human)

    _run(action)


def _load_eval_inputs(catalog, data_path, fmt):
    controls = load_control_catalog(catalog, fmt)
    known = {c.control_id for c in controls}
    checks, warnings = load_techspec_dataset(data_path, fmt, known_controls=known)
    for warning in warnings:
        click.echo(f"warning: {warning}", err=True)
    labeled = [c for c in checks if c.labels]
    return controls, labeled


@main.command(name="eval")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--catalog", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl")
@click.option(
    "--backend", "backends", multiple=True,
    type=click.Choice(["search", "cnn", "hybrid"]),
    help="repeatable; defaults to all three",
)
@click.option("--k", type=int, default=3)
@click.option("--test-fraction", type=float, default=0.15)
@click.option("--thresholds", default=None, help="comma-separated, e.g. 0.1,0.5,0.9")
@click.option("--iterations", type=int, default=5)
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--out-csv", type=click.Path(path_type=Path), default=None)
@click.option("--out-json", type=click.Path(path_type=Path), default=None)
@click.option("--plot", "plot_path", type=click.Path(path_type=Path), default=None)
@click.option("--experiment", default="sweep", help="report name for GET /v1/metrics")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def eval_cmd(ctx, data_path, catalog, fmt, backends, k, test_fraction, thresholds,
             iterations, seed, epochs, out_csv, out_json, plot_path, experiment, as_json):
    """Precision/recall threshold sweep over a labeled dataset."""

    def action():
        controls, checks = _load_eval_inputs(catalog, data_path, fmt)
        chosen = tuple(backends) or ("search", "cnn", "hybrid")
        eval_config = EvalConfig(
            k=k,
            test_fraction=test_fraction,
            thresholds=(
                tuple(float(x) for x in thresholds.split(",")) if thresholds
                else EvalConfig().thresholds
            ),
            seed=seed if seed is not None else int(ctx.file_values.get("seed", 0)),
            iterations=iterations,
        )
        results = threshold_sweep(
            checks, controls, chosen, eval_config,
            ctx.train_config(epochs=epochs, seed=seed),
        )
        csv_text = metric_points_to_csv(results)
        if out_csv is not None:
            Path(out_csv).write_text(csv_text, encoding="utf-8")
            click.echo(f"wrote {out_csv}", err=True)
        if out_json is not None:
            Path(out_json).write_text(metric_points_to_json(results), encoding="utf-8")
            click.echo(f"wrote {out_json}", err=True)
        if plot_path is not None:
            from .plots import plot_threshold_sweep

            plot_threshold_sweep(results, plot_path)
            click.echo(f"wrote {plot_path}", err=True)
        if (ctx.data_dir / "config.json").exists():
            engine = ctx.engine()
            engine.save_report(experiment, json.loads(metric_points_to_json(results)))
        if as_json:
            click.echo(metric_points_to_json(results))
        else:
            click.echo(csv_text, nl=False)

    _run(action)


@main.command(name="simulate-feedback")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--catalog", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl")
@click.option("--y", "y_interval", type=int, default=None)
@click.option("--iterations", type=int, default=None)
@click.option("--test-fraction", type=float, default=0.15)
@click.option("--threshold", type=float, default=0.8, callback=_threshold_arg,
              help="operating threshold for the f1 series")
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--out-csv", type=click.Path(path_type=Path), default=None)
@click.option("--plot", "plot_path", type=click.Path(path_type=Path), default=None)
@click.option("--experiment", default="feedback", help="report name for GET /v1/metrics")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_obj
def simulate_feedback(ctx, data_path, pool_path, catalog, fmt, y_interval, iterations,
                      test_fraction, threshold, seed, epochs, out_csv, plot_path,
                      experiment, as_json):
    """Replay a verified-mapping pool through the feedback loop."""

    def action():
        controls, checks = _load_eval_inputs(catalog, data_path, fmt)
        known = {c.control_id for c in controls}
        pool, pool_warnings = load_techspec_dataset(pool_path, fmt, known_controls=known)
        for warning in pool_warnings:
            click.echo(f"warning: {warning}", err=True)
        y = y_interval
        if y is None:
            if not iterations:
                raise click.UsageError("pass --y or --iterations")
            if len(pool) % iterations:
                raise click.UsageError(
                    f"pool of {len(pool)} does not divide into {iterations} iterations"
                )
            y = len(pool) // iterations
        eval_config = EvalConfig(
            test_fraction=test_fraction,
            seed=seed if seed is not None else int(ctx.file_values.get("seed", 0)),
            iterations=1,
            operating_threshold=threshold,
        )
        base, eval_set = split_folds(checks, eval_config)
        result = simulate_feedback_experiment(
            base, pool, eval_set, controls,
            FeedbackConfig(y=y), eval_config,
            ctx.train_config(epochs=epochs, seed=seed),
        )
        csv_text = feedback_series_to_csv(result)
        if out_csv is not None:
            Path(out_csv).write_text(csv_text, encoding="utf-8")
            click.echo(f"wrote {out_csv}", err=True)
        if plot_path is not None:
            from .plots import plot_feedback_series

            plot_feedback_series(result, plot_path)
            click.echo(f"wrote {plot_path}", err=True)
        payload = {
            "points": [{"iteration": i, "f1": f} for i, f in result.points],
            "retrains": result.retrains,
            "y": y,
        }
        if (ctx.data_dir / "config.json").exists():
            ctx.engine().save_report(experiment, payload)
        _echo_data(payload, as_json, csv_text.rstrip("\n"))

    _run(action)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--token", default=None, help="optional bearer token for write endpoints")
@click.pass_obj
def serve(ctx, host, port, token):
    """Run the HTTP API."""
    import uvicorn

    from .service import create_app

    engine = ctx.engine(async_retrain=True, token=token)
    click.echo(f"serving {ctx.data_dir} on http://{host}:{port}", err=True)
    uvicorn.run(create_app(engine), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
