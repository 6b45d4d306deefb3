"""Detection service: endpoint behavior, parity with offline scoring, failure modes."""

import socket

import numpy as np
import pytest
from fastapi.testclient import TestClient

from promptgate.embed import ProviderConfig, hash_embed
from promptgate.learn import predict_proba, save_model, train_logreg
from promptgate.serve import (
    BATCH_LIMIT,
    DetectionService,
    ServiceConfig,
    create_app,
)

LOCAL_PROVIDER = ProviderConfig(kind="local-hash", dim=384)


@pytest.fixture(scope="module")
def trained(tmp_path_factory, fixture_dataset):
    model = train_logreg(
        fixture_dataset.matrix,
        fixture_dataset.labels,
        provider_tag=fixture_dataset.provider_tag,
    )
    path = tmp_path_factory.mktemp("serve") / "model.json"
    save_model(model, path)
    return model, str(path)


def make_service(model_path, provider=LOCAL_PROVIDER, **overrides):
    config = ServiceConfig(model_path=model_path, provider=provider, **overrides)
    service = DetectionService(config)
    service.load()
    return service


@pytest.fixture(scope="module")
def client(trained):
    _, path = trained
    return TestClient(create_app(make_service(path)))


class TestHealthz:
    def test_loading_before_load(self, trained):
        _, path = trained
        service = DetectionService(ServiceConfig(model_path=path, provider=LOCAL_PROVIDER))
        app = TestClient(create_app(service))
        body = app.get("/healthz").json()
        assert body["status"] == "loading"
        assert body["model_tag"] == ""
        assert body["provider_tag"] == "local-hash-384"

    def test_ok_after_load(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert body["model_tag"] == "logreg"
        assert body["provider_tag"] == "local-hash-384"
        assert body["uptime_seconds"] >= 0.0


class TestDetect:
    def test_matches_offline_scoring(self, client, trained, corpus_records):
        model, _ = trained
        for record in corpus_records[:20]:
            resp = client.post("/v1/detect", json={"prompt": record.text})
            assert resp.status_code == 200
            body = resp.json()
            offline = float(predict_proba(model, hash_embed(record.text, 384)[None, :])[0])
            assert body["score"] == pytest.approx(offline, abs=1e-12)
            assert body["model_tag"] == "logreg"
            assert body["provider_tag"] == "local-hash-384"
            assert body["threshold"] == 0.5
            expected = "malicious" if body["score"] >= 0.5 else "benign"
            assert body["label"] == expected

    def test_zero_threshold_blocks_everything(self, trained):
        _, path = trained
        app = TestClient(create_app(make_service(path, threshold=0.0)))
        body = app.post("/v1/detect", json={"prompt": "hello there"}).json()
        assert body["label"] == "malicious"
        assert body["threshold"] == 0.0

    @pytest.mark.parametrize("prompt", ["", "   ", "\n\t"])
    def test_blank_prompt_rejected(self, client, prompt):
        resp = client.post("/v1/detect", json={"prompt": prompt})
        assert resp.status_code == 400
        assert resp.json()["detail"] == "prompt must be non-empty"

    def test_missing_field_rejected(self, client):
        assert client.post("/v1/detect", json={}).status_code == 422

    def test_detect_before_load_raises(self, trained):
        _, path = trained
        service = DetectionService(ServiceConfig(model_path=path, provider=LOCAL_PROVIDER))
        with pytest.raises(RuntimeError, match="not loaded"):
            service.detect("hi")


class TestDetectBatch:
    def test_batch_equals_singles(self, client, corpus_records):
        prompts = [r.text for r in corpus_records[:10]]
        batch = client.post("/v1/detect_batch", json={"prompts": prompts}).json()
        singles = [
            client.post("/v1/detect", json={"prompt": p}).json() for p in prompts
        ]
        assert batch["results"] == singles

    def test_empty_batch(self, client):
        resp = client.post("/v1/detect_batch", json={"prompts": []})
        assert resp.status_code == 400
        assert resp.json()["detail"] == "batch must contain at least one prompt"

    def test_oversized_batch(self, client):
        prompts = ["hi"] * (BATCH_LIMIT + 1)
        resp = client.post("/v1/detect_batch", json={"prompts": prompts})
        assert resp.status_code == 400
        assert resp.json()["detail"] == "batch of 257 exceeds the limit of 256 prompts"

    def test_blank_entry_rejects_whole_batch(self, client):
        resp = client.post("/v1/detect_batch", json={"prompts": ["ok", "  ", "ok"]})
        assert resp.status_code == 400
        assert resp.json()["detail"] == "prompt at index 1 is empty; whole batch rejected"


class TestBodyLimit:
    def test_oversized_body_rejected(self, trained):
        _, path = trained
        app = TestClient(create_app(make_service(path, max_body_bytes=120)))
        resp = app.post("/v1/detect", json={"prompt": "x" * 400})
        assert resp.status_code == 413
        assert resp.json()["detail"] == "body exceeds 120 bytes"
        # small bodies still pass through the middleware
        assert app.post("/v1/detect", json={"prompt": "short"}).status_code == 200


def _dead_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def remote_model_path(tmp_path_factory):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 8))
    y = (X[:, 0] > 0).astype(np.int64)
    model = train_logreg(X, y, provider_tag="stub-model")
    path = tmp_path_factory.mktemp("remote") / "model.json"
    save_model(model, path)
    return str(path)


def _remote_provider():
    return ProviderConfig(
        kind="remote",
        model_name="stub-model",
        base_url=f"http://127.0.0.1:{_dead_port()}",
        dim=8,
        retry_max_attempts=1,
        retry_backoff_s=0.01,
    )


class TestProviderFailure:
    def test_fail_open_returns_502(self, remote_model_path):
        service = make_service(remote_model_path, provider=_remote_provider())
        app = TestClient(create_app(service))
        resp = app.post("/v1/detect", json={"prompt": "hello"})
        assert resp.status_code == 502
        assert resp.json()["detail"].startswith("embedding provider failed:")

    def test_fail_closed_degrades_to_block(self, remote_model_path):
        service = make_service(
            remote_model_path, provider=_remote_provider(), fail_closed=True
        )
        app = TestClient(create_app(service))
        resp = app.post("/v1/detect", json={"prompt": "hello"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["score"] is None
        assert body["label"] == "malicious"
        assert body["degraded"] is True

        batch = app.post("/v1/detect_batch", json={"prompts": ["a", "b", "c"]})
        assert batch.status_code == 200
        results = batch.json()["results"]
        assert len(results) == 3
        assert all(r["degraded"] and r["label"] == "malicious" for r in results)


class TestLoadRefusals:
    def test_provider_tag_mismatch(self, remote_model_path):
        config = ServiceConfig(model_path=remote_model_path, provider=LOCAL_PROVIDER)
        with pytest.raises(ValueError, match="refusing to serve mismatched scores"):
            DetectionService(config).load()

    def test_feature_dim_mismatch(self, tmp_path, fixture_dataset):
        # model claims the right provider tag but was trained on 16 features
        model = train_logreg(
            fixture_dataset.matrix[:, :16],
            fixture_dataset.labels,
            provider_tag="local-hash-384",
        )
        path = tmp_path / "narrow.json"
        save_model(model, path)
        config = ServiceConfig(model_path=str(path), provider=LOCAL_PROVIDER)
        with pytest.raises(ValueError, match="expects 16 features, provider produces 384"):
            DetectionService(config).load()

    def test_missing_model_file(self, tmp_path):
        config = ServiceConfig(model_path=str(tmp_path / "absent.json"), provider=LOCAL_PROVIDER)
        with pytest.raises(FileNotFoundError):
            DetectionService(config).load()


class TestServiceConfig:
    def test_host_and_port(self):
        config = ServiceConfig(
            model_path="m.json", provider=LOCAL_PROVIDER, listen_address="0.0.0.0:9000"
        )
        assert config.host == "0.0.0.0"
        assert config.port == 9000

    @pytest.mark.parametrize(
        "overrides",
        [
            {"threshold": 1.5},
            {"threshold": -0.1},
            {"max_body_bytes": 0},
            {"request_timeout_s": 0.0},
            {"listen_address": "nohost"},
            {"listen_address": "host:notaport"},
            {"listen_address": "host:70000"},
            {"listen_address": ":8000"},
        ],
    )
    def test_rejects_bad_settings(self, overrides):
        with pytest.raises(ValueError):
            ServiceConfig(model_path="m.json", provider=LOCAL_PROVIDER, **overrides)
