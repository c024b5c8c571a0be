"""Acceptance suite: every gate criterion at its stated tolerance.

Runs against the bundled synthetic fixtures (the real corpora are not
redistributable), so quality criteria are property-based plus trend
replication rather than absolute-number reproduction. One line per
criterion is printed in the terminal summary (see conftest).
"""

import random
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from regmap.classifier import TrainConfig, gradient_check, loss_gradients
from regmap.cli import main as cli_main
from regmap.corpus import TokenStream, controls_to_jsonl
from regmap.engine import Engine, EngineConfig
from regmap.evaluation import (
    EvalConfig,
    build_backends,
    metric_points_to_csv,
    score_eval_set,
    simulate_feedback_experiment,
    split_folds,
    sweep_scored,
    threshold_sweep,
)
from regmap.feedback import FeedbackConfig, FeedbackRecord
from regmap.fixtures import small_corpus, synthetic_corpus, write_fixture_files
from regmap.index import build_index
from regmap.service import create_app

from .oracles import bm25_reference_score, bm25_reference_search
from .test_classifier import random_params

ACCEPT_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(1, 10))

# full bundled fixture: 200 controls, 2000 checks
FULL_TRAIN = TrainConfig(
    d=48, widths=(2, 3), n_filters=24, epochs=22, batch_size=64,
    learning_rate=1e-2, seed=5, max_seq_len=48, min_freq=1,
)

# reduced sizes for the repeated-retrain criteria
SMALL_TRAIN = TrainConfig(
    d=16, widths=(2, 3), n_filters=8, epochs=10, batch_size=32,
    learning_rate=8e-3, seed=5, max_seq_len=32, min_freq=1,
)


@pytest.fixture(scope="session")
def full_corpus():
    return synthetic_corpus()


@pytest.fixture(scope="session")
def sweep_backends(full_corpus):
    """Backends built once on a train/test split of the full fixture,
    with per-backend confidence dicts precomputed for the test fold."""
    config = EvalConfig(seed=1, iterations=1, thresholds=ACCEPT_THRESHOLDS)
    train_fold, test_fold = split_folds(full_corpus.checks, config)
    built = build_backends(train_fold, full_corpus.controls, FULL_TRAIN)
    scored = {
        name: score_eval_set(built, test_fold, name)
        for name in ("search", "cnn", "hybrid")
    }
    return built, scored


@pytest.fixture(scope="session")
def service_client(tmp_path_factory, full_corpus):
    """Engine trained on the complete bundled fixture, behind the API."""
    data_dir = tmp_path_factory.mktemp("acceptance-data")
    engine = Engine(
        EngineConfig(data_dir=data_dir, train=FULL_TRAIN, feedback=FeedbackConfig(y=50))
    )
    engine.ingest_catalog(full_corpus.regulation_id, controls_to_jsonl(full_corpus.controls))
    engine.train(full_corpus.regulation_id, full_corpus.checks)
    with TestClient(create_app(engine)) as client:
        client.regulation_id = full_corpus.regulation_id
        client.engine = engine
        yield client


def test_bm25_oracle_equivalence():
    """Engine scores match the brute-force scorer, |delta| < 1e-9,
    identical ranking: 50 random corpora x 20 queries, under 30 s."""
    started = time.monotonic()
    rng = random.Random(20260810)
    vocab = [f"term{i}" for i in range(60)]
    for corpus_i in range(50):
        n_docs = rng.randint(2, 100)
        raw: dict[str, list[str]] = {}
        labels: dict[str, frozenset] = {}
        docs = []
        for d in range(n_docs):
            tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 40))]
            label_set = frozenset(f"L{rng.randint(0, 30)}" for _ in range(rng.randint(1, 3)))
            doc_id = f"doc{d}"
            raw[doc_id] = tokens
            labels[doc_id] = label_set
            docs.append((TokenStream(tokens=tuple(tokens), origin_len=len(tokens)), label_set, doc_id))
        index = build_index(docs)
        for _ in range(20):
            query = [rng.choice(vocab) for _ in range(rng.randint(1, 8))]
            stream = TokenStream(tokens=tuple(query), origin_len=len(query))
            probe = rng.sample(list(raw), min(5, n_docs))
            for doc_id in probe:
                got = index.bm25_score(stream, doc_id)
                want = bm25_reference_score(raw, query, doc_id)
                assert abs(got - want) < 1e-9
            got_hits = index.search(stream, max_hits=25)
            want_hits = bm25_reference_search(raw, labels, query, max_hits=25)
            assert [h.label for h in got_hits] == [w[0] for w in want_hits]
            for hit, (_, rel, conf) in zip(got_hits, want_hits):
                assert abs(hit.relevance - rel) < 1e-9
                assert abs(hit.confidence - conf) < 1e-9
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"oracle sweep took {elapsed:.1f}s"


def test_gradient_correctness():
    """Max relative error < 1e-4 on 20 random small nets; a corrupted
    gradient trips the check; under 60 s."""
    started = time.monotonic()
    for seed in range(20):
        rng = np.random.default_rng(7000 + seed)
        params = random_params(
            rng, vocab_size=9, n_labels=3, d=4, widths=(2, 3), n_filters=2
        )
        assert params.n_parameters() <= 10_000
        ids = rng.integers(2, 9, size=6)
        targets = (rng.random(3) < 0.5).astype(float)
        err = gradient_check(params, ids, targets)
        assert err < 1e-4, f"seed {seed}: max relative error {err}"
    # negative control: a corrupted analytic gradient must fail the check
    rng = np.random.default_rng(424242)
    params = random_params(rng, vocab_size=9, n_labels=3, d=4, widths=(2, 3), n_filters=2)
    ids = rng.integers(2, 9, size=6)
    targets = (rng.random(3) < 0.5).astype(float)
    _, grads = loss_gradients(params, ids[None, :], targets[None, :])
    grads["conv_w_2"] = grads["conv_w_2"].copy()
    grads["conv_w_2"][0, 0, 0] += 0.1
    assert gradient_check(params, ids, targets, analytic=grads) > 1e-2
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"gradient checks took {elapsed:.1f}s"


def test_hybrid_recall_dominance(sweep_backends):
    """Hybrid recall >= max(search, cnn) recall at every threshold,
    exactly (superset property, zero tolerance)."""
    _, scored = sweep_backends
    points = {
        name: sweep_scored(scored[name], ACCEPT_THRESHOLDS, name)
        for name in ("search", "cnn", "hybrid")
    }
    for s, c, h in zip(points["search"], points["cnn"], points["hybrid"]):
        assert h.recall >= max(s.recall, c.recall), (
            f"threshold {h.threshold}: hybrid {h.recall} < "
            f"max(search {s.recall}, cnn {c.recall})"
        )
    # the mechanism: per-example hybrid label sets are supersets
    for t in ACCEPT_THRESHOLDS:
        for (s_scores, _), (c_scores, _), (h_scores, _) in zip(
            scored["search"], scored["cnn"], scored["hybrid"]
        ):
            s_labels = {l for l, conf in s_scores.items() if conf >= t}
            c_labels = {l for l, conf in c_scores.items() if conf >= t}
            h_labels = {l for l, conf in h_scores.items() if conf >= t}
            assert s_labels | c_labels <= h_labels


def test_threshold_monotonicity(sweep_backends):
    """Recall and predicted-label count never increase with threshold,
    for all three backends."""
    _, scored = sweep_backends
    for name in ("search", "cnn", "hybrid"):
        points = sweep_scored(scored[name], ACCEPT_THRESHOLDS, name)
        recalls = [p.recall for p in points]
        assert all(a >= b for a, b in zip(recalls, recalls[1:])), name
        counts = [
            sum(
                len([l for l, conf in scores.items() if conf >= t])
                for scores, _ in scored[name]
            )
            for t in ACCEPT_THRESHOLDS
        ]
        assert all(a >= b for a, b in zip(counts, counts[1:])), name


def test_feedback_trend():
    """simulate-feedback, 5 iterations with y = pool/5: final f1 >= the
    no-feedback baseline and floor(n/y) retrains observed; under 10 min."""
    started = time.monotonic()
    corpus = synthetic_corpus(
        seed=11, n_topics=12, n_platforms=4, checks_per_control=8, pool_size=150
    )
    config = EvalConfig(seed=2, iterations=1, operating_threshold=0.8)
    base, eval_set = split_folds(corpus.checks, config)
    y = len(corpus.pool) // 5
    result = simulate_feedback_experiment(
        base, corpus.pool, eval_set, corpus.controls,
        FeedbackConfig(y=y), config,
        TrainConfig(d=32, widths=(2, 3), n_filters=16, epochs=40, batch_size=32,
                    learning_rate=8e-3, seed=5, max_seq_len=48, min_freq=1),
    )
    assert [i for i, _ in result.points] == [0, 1, 2, 3, 4, 5]
    f1_first = result.points[0][1]
    f1_last = result.points[-1][1]
    assert f1_last >= f1_first, f"f1 fell from {f1_first:.4f} to {f1_last:.4f}"
    assert result.retrains == len(corpus.pool) // y
    assert result.final_state.total_feedback == len(corpus.pool)
    elapsed = time.monotonic() - started
    assert elapsed < 600.0, f"feedback experiment took {elapsed:.1f}s"


def test_table1_fixture_reproduction(service_client):
    """After training on the bundled fixture, mapping the embedded
    disk-encryption check at threshold 0.3 returns SC-28 and SC-13."""
    response = service_client.post(
        "/v1/map",
        json={
            "text": "Check whether data disks are encrypted",
            "regulation_id": service_client.regulation_id,
            "threshold": 0.3,
        },
    )
    assert response.status_code == 200
    labels = {r["control_id"] for r in response.json()["results"]}
    assert "SC-28" in labels and "SC-13" in labels
    # the classifier alone also ranks both controls in its top 3
    model = service_client.engine._state(service_client.regulation_id).model
    scores = model.predict("Check whether data disks are encrypted")
    top3 = sorted(scores, key=lambda k: -scores[k])[:3]
    assert "SC-28" in top3 and "SC-13" in top3


def test_crash_consistency(tmp_path):
    """Kill the process after any acknowledged feedback and restart:
    the replayed status matches the live one at 20 random kill points."""
    corpus = small_corpus()
    data_dir = tmp_path / "crash-data"
    engine = Engine(
        EngineConfig(data_dir=data_dir, train=SMALL_TRAIN, feedback=FeedbackConfig(y=4))
    )
    engine.ingest_catalog(corpus.regulation_id, controls_to_jsonl(corpus.controls))
    engine.train(corpus.regulation_id, corpus.checks)
    reg = corpus.regulation_id
    feedback_path = data_dir / "feedback" / f"{reg}.jsonl"

    def status_fields(e):
        s = e.status().regulations[reg]
        return {
            k: s[k]
            for k in ("index_generation", "model_generation",
                      "pending_feedback", "total_feedback")
        }

    log_snapshots = {}
    live_status = {}
    controls_cycle = sorted(engine.known_controls(reg))
    for i in range(20):
        record = FeedbackRecord(
            feedback_id=f"crash-{i}",
            check_text=f"verify {controls_cycle[i % len(controls_cycle)]} related setting",
            accepted=frozenset({controls_cycle[i % len(controls_cycle)]}),
            rejected=frozenset(),
        )
        engine.submit_feedback(reg, record)
        # everything durable at this instant: the fsynced feedback log
        log_snapshots[i + 1] = feedback_path.read_bytes()
        live_status[i + 1] = status_fields(engine)

    rng = random.Random(1)
    kill_points = rng.sample(range(1, 21), 20)
    for kill in kill_points:
        feedback_path.write_bytes(log_snapshots[kill])
        replayed = Engine(EngineConfig(data_dir=data_dir))
        assert status_fields(replayed) == live_status[kill], f"kill point {kill}"


def test_determinism(tmp_path, full_corpus):
    """Fixed seeds: byte-identical model snapshots and identical
    evaluation CSVs across two runs."""
    corpus = small_corpus()
    snapshots = []
    for run in range(2):
        data_dir = tmp_path / f"det-{run}"
        engine = Engine(EngineConfig(data_dir=data_dir, train=SMALL_TRAIN))
        engine.ingest_catalog(corpus.regulation_id, controls_to_jsonl(corpus.controls))
        engine.train(corpus.regulation_id, corpus.checks)
        snapshots.append(
            (data_dir / "models" / f"{corpus.regulation_id}.model").read_bytes()
        )
    assert snapshots[0] == snapshots[1]

    config = EvalConfig(seed=3, iterations=1, thresholds=(0.2, 0.5, 0.8))
    csvs = [
        metric_points_to_csv(
            threshold_sweep(
                corpus.checks, corpus.controls, ("search", "cnn", "hybrid"),
                config, SMALL_TRAIN,
            )
        )
        for _ in range(2)
    ]
    assert csvs[0] == csvs[1]


def test_cli_eval_end_to_end(tmp_path):
    """The operator report path holds the same guarantees: CSV rows per
    (threshold, backend), monotone recall, dominant hybrid recall, and a
    figure rendered next to the delimited output."""
    corpus = small_corpus()
    paths = write_fixture_files(corpus, tmp_path / "fixtures")
    out_csv = tmp_path / "sweep.csv"
    out_svg = tmp_path / "sweep.svg"
    result = CliRunner().invoke(
        cli_main,
        ["--data-dir", str(tmp_path / "data"), "eval",
         "--data", str(paths["checks"]), "--catalog", str(paths["controls"]),
         "--iterations", "1", "--epochs", "8",
         "--out-csv", str(out_csv), "--plot", str(out_svg)],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    rows = [line.split(",") for line in out_csv.read_text().strip().splitlines()[1:]]
    assert len(rows) == 3 * 9
    by_backend = {
        b: [float(r[3]) for r in rows if r[1] == b] for b in ("search", "cnn", "hybrid")
    }
    for recalls in by_backend.values():
        assert all(a >= b - 1e-12 for a, b in zip(recalls, recalls[1:]))
    for s, c, h in zip(by_backend["search"], by_backend["cnn"], by_backend["hybrid"]):
        assert h >= max(s, c) - 1e-12
    assert out_svg.exists() and "<svg" in out_svg.read_text()
