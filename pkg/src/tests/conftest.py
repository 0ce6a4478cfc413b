"""Pytest fixtures."""

from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from sqlalchemy.orm import Session, sessionmaker

from app.db.schema import Base
from app.db.session import build_engine, get_db
from app.main import app
from app.services.markov import (
    LyapunovCertificate,
    LyapunovVariant,
    MarkovModel,
    verify_lyapunov,
)
from app.services.measures import DiscreteMeasure, consolidate
from app.services.streams import replication_stream


@pytest.fixture
def client_with_test_db() -> Generator[TestClient, None, None]:
    """TestClient whose `get_db` yields sessions on a private in-memory SQLite store."""
    test_engine = build_engine("sqlite://")
    Base.metadata.create_all(test_engine)
    TestSession = sessionmaker(bind=test_engine, expire_on_commit=False)

    def override_get_db() -> Generator[Session, None, None]:
        with TestSession() as session:
            yield session

    app.dependency_overrides[get_db] = override_get_db
    try:
        yield TestClient(app)
    finally:
        app.dependency_overrides.clear()
        test_engine.dispose()


@pytest.fixture
def api_output_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Redirect API-triggered experiment files into a per-test directory."""
    from app.core.config import settings

    monkeypatch.setattr(settings, "output_dir", str(tmp_path / "runs"))
    return tmp_path / "runs"


# Numerical fixtures

TWO_STATE_KERNEL = [[0.7, 0.3], [0.2, 0.8]]


@pytest.fixture
def two_state_model() -> MarkovModel:
    """States 0 and 1, a = 0.3, b = 0.2; invariant law (0.4, 0.6)."""
    return MarkovModel.from_kernel([0.0, 1.0], TWO_STATE_KERNEL)


@pytest.fixture
def two_state_certificate(two_state_model: MarkovModel) -> LyapunovCertificate:
    """V = (0, 1), gamma = 0.85, K = 0.31; R = 210 clears the L2' radius 4K/(1-sqrt(gamma))^2 ≈ 203.6."""
    return verify_lyapunov(
        two_state_model, [0.0, 1.0], 0.85, 0.31, 210.0, 0.5, LyapunovVariant.L2_PRIME
    )


@pytest.fixture
def fair_coin() -> DiscreteMeasure:
    return consolidate([0.0, 1.0], [0.5, 0.5])


@pytest.fixture
def rng() -> np.random.Generator:
    return replication_stream(20240607, 99)
