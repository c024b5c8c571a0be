import threading
import time

import pytest
from fastapi.testclient import TestClient

from regmap import classifier
from regmap.classifier import TrainConfig
from regmap.corpus import controls_to_jsonl
from regmap.engine import Engine, EngineConfig
from regmap.feedback import FeedbackConfig
from regmap.fixtures import small_corpus
from regmap.service import create_app

TINY_TRAIN = TrainConfig(
    d=16, widths=(2, 3), n_filters=8, epochs=10, batch_size=32,
    learning_rate=8e-3, seed=5, max_seq_len=32, min_freq=1,
)


@pytest.fixture
def corpus():
    return small_corpus()


@pytest.fixture
def client(tmp_path, corpus):
    engine = Engine(
        EngineConfig(
            data_dir=tmp_path / "data",
            feedback=FeedbackConfig(y=3),
            train=TINY_TRAIN,
            async_retrain=True,
        )
    )
    with TestClient(create_app(engine)) as c:
        c.engine = engine
        yield c
    engine.close()


def ingest(client, corpus, **kwargs):
    return client.post(
        "/v1/catalogs",
        json={
            "regulation_id": corpus.regulation_id,
            "content": controls_to_jsonl(corpus.controls),
            "format": "jsonl",
            **kwargs,
        },
    )


def train(client, corpus):
    client.engine.train(corpus.regulation_id, corpus.checks)


def test_ingest_happy_path(client, corpus):
    response = ingest(client, corpus)
    assert response.status_code == 200
    assert response.json()["loaded"] == len(corpus.controls)


def test_ingest_duplicate_409(client, corpus):
    ingest(client, corpus)
    response = ingest(client, corpus)
    assert response.status_code == 409
    assert response.json()["code"] == "RegulationExistsError"
    assert ingest(client, corpus, replace=True).status_code == 200


def test_ingest_parse_error_400_with_line(client, corpus):
    response = client.post(
        "/v1/catalogs",
        json={"regulation_id": "R", "content": '{"bad json\n', "format": "jsonl"},
    )
    assert response.status_code == 400
    body = response.json()
    assert body["code"] == "ParseError"
    assert body["details"]["line"] == 1


def test_ingest_duplicate_control_400(client):
    content = (
        '{"regulation_id": "R", "control_id": "SC-28", "family": "SC", "title": "t", "text": "protect data"}\n'
    ) * 2
    response = client.post(
        "/v1/catalogs", json={"regulation_id": "R", "content": content}
    )
    assert response.status_code == 400
    assert response.json()["code"] == "DuplicateControlIdError"


def test_map_unknown_regulation_404(client):
    response = client.post("/v1/map", json={"text": "x", "regulation_id": "NOPE"})
    assert response.status_code == 404


def test_map_threshold_out_of_range_422(client, corpus):
    ingest(client, corpus)
    response = client.post(
        "/v1/map",
        json={"text": "x", "regulation_id": corpus.regulation_id, "threshold": 1.5},
    )
    assert response.status_code == 422


def test_map_returns_embedded_mapping(client, corpus):
    ingest(client, corpus)
    train(client, corpus)
    response = client.post(
        "/v1/map",
        json={
            "text": "Check whether data disks are encrypted",
            "regulation_id": corpus.regulation_id,
            "threshold": 0.3,
        },
    )
    assert response.status_code == 200
    body = response.json()
    labels = {r["control_id"] for r in body["results"]}
    assert {"SC-28", "SC-13"} <= labels
    assert body["model_generation"] >= 1
    assert body["results"] == sorted(
        body["results"], key=lambda r: (-r["confidence"], r["control_id"])
    )


def test_feedback_round_trip_and_status(client, corpus):
    ingest(client, corpus)
    response = client.post(
        "/v1/feedback",
        json={
            "regulation_id": corpus.regulation_id,
            "feedback_id": "fb-1",
            "check_text": "verify disks encrypted",
            "accepted": ["SC-28"],
            "rejected": ["AC-6"],
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["accepted"] is True and body["pending"] == 1

    coverage = client.get(
        "/v1/coverage", params={"regulation": corpus.regulation_id}
    ).json()
    assert "SC-28" in coverage["covered"]

    status = client.get("/v1/status").json()
    assert status["pending_feedback"] == 1
    assert status["regulations"][corpus.regulation_id]["total_feedback"] == 1


def test_feedback_invalid_422(client, corpus):
    ingest(client, corpus)
    response = client.post(
        "/v1/feedback",
        json={
            "regulation_id": corpus.regulation_id,
            "feedback_id": "fb-1",
            "check_text": "x",
            "accepted": ["SC-28"],
            "rejected": ["SC-28"],
        },
    )
    assert response.status_code == 422


def test_feedback_duplicate_409(client, corpus):
    ingest(client, corpus)
    payload = {
        "regulation_id": corpus.regulation_id,
        "feedback_id": "fb-1",
        "check_text": "x",
        "accepted": ["SC-28"],
    }
    assert client.post("/v1/feedback", json=payload).status_code == 200
    assert client.post("/v1/feedback", json=payload).status_code == 409


def test_retrain_bumps_generation_in_status(client, corpus):
    ingest(client, corpus)
    train(client, corpus)
    for i in range(3):  # y = 3
        client.post(
            "/v1/feedback",
            json={
                "regulation_id": corpus.regulation_id,
                "feedback_id": f"fb-{i}",
                "check_text": "verify disks encrypted",
                "accepted": ["SC-28"],
            },
        )
    client.engine.wait_for_retrains()
    status = client.get("/v1/status").json()
    assert status["regulations"][corpus.regulation_id]["model_generation"] == 2
    assert status["regulations"][corpus.regulation_id]["pending_feedback"] == 0


def test_map_does_not_block_on_retrain(client, corpus, monkeypatch):
    ingest(client, corpus)
    train(client, corpus)

    slow_started = threading.Event()
    original = classifier.model.train_model

    def slow_train(*args, **kwargs):
        slow_started.set()
        time.sleep(1.0)
        return original(*args, **kwargs)

    monkeypatch.setattr("regmap.engine.train_model", slow_train)
    for i in range(3):
        client.post(
            "/v1/feedback",
            json={
                "regulation_id": corpus.regulation_id,
                "feedback_id": f"fb-{i}",
                "check_text": "verify disks encrypted",
                "accepted": ["SC-28"],
            },
        )
    assert slow_started.wait(timeout=5.0)
    t0 = time.monotonic()
    response = client.post(
        "/v1/map",
        json={
            "text": "audit events logging",
            "regulation_id": corpus.regulation_id,
            "threshold": 0.2,
        },
    )
    elapsed = time.monotonic() - t0
    assert response.status_code == 200
    assert elapsed < 0.9, f"map blocked for {elapsed:.2f}s during retrain"
    client.engine.wait_for_retrains()


def test_metrics_endpoint(client, corpus):
    client.engine.save_report("exp-1", {"points": [1, 2]})
    assert client.get("/v1/metrics", params={"experiment": "exp-1"}).json() == {
        "points": [1, 2]
    }
    assert client.get("/v1/metrics", params={"experiment": "nope"}).status_code == 404


def test_auth_token_gates_writes(tmp_path, corpus):
    engine = Engine(
        EngineConfig(
            data_dir=tmp_path / "data-auth",
            train=TINY_TRAIN,
            auth_token="secret",
        )
    )
    with TestClient(create_app(engine)) as client:
        denied = ingest(client, corpus)
        assert denied.status_code == 401
        ok = client.post(
            "/v1/catalogs",
            json={
                "regulation_id": corpus.regulation_id,
                "content": controls_to_jsonl(corpus.controls),
            },
            headers={"Authorization": "Bearer secret"},
        )
        assert ok.status_code == 200
        # reads stay open
        assert client.get("/v1/status").status_code == 200
