"""Tests for the HTTP surface."""
from unittest.mock import patch

import pytest
from fastapi.testclient import TestClient

from src.api.main import app


@pytest.fixture
def client():
    return TestClient(app)


class TestHealth:
    def test_root(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert response.json()["status"] == "healthy"

    def test_health_reports_limits(self, client):
        body = client.get("/health").json()
        assert body["service"] == "cvpv-sim"
        assert body["max_qubits"] >= 1


class TestBounds:
    def test_eat_and_success(self, client):
        response = client.post("/bounds", json={
            "eat": {"n": 100, "h": 0.5, "c1": 1, "c0": 5},
            "success": {"p_block": 0.1, "alpha": 1.0, "m": 4},
        })
        assert response.status_code == 200
        body = response.json()
        assert body["eat"]["eat_bound"] == pytest.approx(35.0)
        assert body["success_bounds"]["repeated"] == pytest.approx(5.46e-3, rel=1e-2)

    def test_domain_error_is_unprocessable(self, client):
        response = client.post("/bounds", json={"g_eps": 1.0})
        assert response.status_code == 422

    def test_malformed_body(self, client):
        assert client.post("/bounds", json={"eat": {"n": 0, "h": 1.0}}).status_code == 422


class TestTrial:
    def test_honest_mock_trial(self, client):
        response = client.post("/trial", json={
            "compiler": {"mode": "sequential", "rounds": 2, "backend": {"kind": "deterministic-answer"}},
            "strategy": {"kind": "honest"},
            "seed": 7,
        })
        assert response.status_code == 200
        body = response.json()
        assert body["verdict"] == "Accept"
        assert body["reason"] == "None"
        assert len(body["rounds"]) == 2

    def test_displaced_trial_is_late(self, client):
        response = client.post("/trial", json={
            "compiler": {"backend": {"kind": "always-accept"}},
            "strategy": {"kind": "displaced-honest"},
        })
        assert response.json()["reason"] == "Timing"

    def test_unknown_strategy(self, client):
        response = client.post("/trial", json={"strategy": {"kind": "teleport"}})
        assert response.status_code == 422

    def test_unexpected_failure(self, client):
        with patch("src.api.main.run_trial", side_effect=RuntimeError("boom")):
            assert client.post("/trial", json={}).status_code == 500
