import pytest
from fastapi.testclient import TestClient

pytestmark = pytest.mark.integration

BASE = "/api/transport"

COIN = {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]}
ORIGIN = {"points": [[0.0]], "weights": [1.0]}


def test_health(client_with_test_db: TestClient) -> None:
    """GET /health returns ok."""
    response = client_with_test_db.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_wasserstein_distance(client_with_test_db: TestClient) -> None:
    """POST /api/transport/wasserstein returns distance and cost without a plan by default."""
    response = client_with_test_db.post(
        f"{BASE}/wasserstein",
        json={"first": ORIGIN, "second": {"points": [[3.0, 4.0]], "weights": [1.0]}, "ell": 2},
    )
    # dimension 1 vs 2
    assert response.status_code == 400
    assert "dimension mismatch" in response.json()["detail"]

    response = client_with_test_db.post(
        f"{BASE}/wasserstein",
        json={"first": ORIGIN, "second": COIN, "ell": 2},
    )
    assert response.status_code == 200
    data = response.json()
    assert data["distance"] == pytest.approx(0.5**0.5)
    assert data["cost"] == pytest.approx(0.5)
    assert data["plan"] is None


def test_wasserstein_with_plan(client_with_test_db: TestClient) -> None:
    """include_plan returns the nonzero plan entries."""
    response = client_with_test_db.post(
        f"{BASE}/wasserstein",
        json={"first": ORIGIN, "second": COIN, "ell": 1, "include_plan": True},
    )
    assert response.status_code == 200
    plan = response.json()["plan"]
    assert [(e["row"], e["col"]) for e in plan] == [(0, 0), (0, 1)]
    assert sum(e["mass"] for e in plan) == pytest.approx(1.0)


def test_wasserstein_zero(client_with_test_db: TestClient) -> None:
    """POST /api/transport/wasserstein0 caps the ground cost at 1."""
    far = {"points": [[10.0]], "weights": [1.0]}
    response = client_with_test_db.post(f"{BASE}/wasserstein0", json={"first": ORIGIN, "second": far})
    assert response.status_code == 200
    assert response.json()["distance"] == pytest.approx(1.0)
    assert response.json()["ell"] == 0.0


def test_weights_must_sum_to_one(client_with_test_db: TestClient) -> None:
    """Unnormalized weights are rejected with 400."""
    response = client_with_test_db.post(
        f"{BASE}/wasserstein",
        json={"first": ORIGIN, "second": {"points": [[0.0], [1.0]], "weights": [0.5, 0.4]}, "ell": 1},
    )
    assert response.status_code == 400
    assert "not 1" in response.json()["detail"]


def test_schema_violations_are_422(client_with_test_db: TestClient) -> None:
    """Negative weights or a negative ell fail request validation."""
    response = client_with_test_db.post(
        f"{BASE}/wasserstein",
        json={"first": ORIGIN, "second": {"points": [[0.0], [1.0]], "weights": [1.5, -0.5]}, "ell": 1},
    )
    assert response.status_code == 422
    response = client_with_test_db.post(
        f"{BASE}/wasserstein", json={"first": ORIGIN, "second": COIN, "ell": -1}
    )
    assert response.status_code == 422


def test_solver_limit_is_413(client_with_test_db: TestClient) -> None:
    """Supports beyond the exact solver bound return 413."""
    n = 2048
    big = {"points": [[float(i)] for i in range(n)], "weights": [1.0 / n] * n}
    response = client_with_test_db.post(f"{BASE}/wasserstein", json={"first": big, "second": COIN, "ell": 1})
    assert response.status_code == 413
