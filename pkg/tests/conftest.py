import numpy as np
import pytest

from backend.database import database
from utils.linop import MatrixOperator
from utils.quadrature import QuadratureConfig


@pytest.fixture
def cfg():
    return QuadratureConfig()


@pytest.fixture
def spd4():
    rng = np.random.default_rng(7)
    q = rng.standard_normal((4, 4))
    return MatrixOperator.from_array(q @ q.T + 4.0 * np.eye(4))


@pytest.fixture
def diag12():
    return MatrixOperator.diagonal([1.0, 2.0])


@pytest.fixture
def ledger(monkeypatch):
    """In-memory ledger installed as the global manager."""
    monkeypatch.delenv('FRACRES_LEDGER_URL', raising=False)
    monkeypatch.delenv('DATABASE_URL', raising=False)
    manager = database.init_database('sqlite:///:memory:')
    yield manager
    database.db_manager = None


@pytest.fixture
def no_ledger(monkeypatch):
    monkeypatch.delenv('FRACRES_LEDGER_URL', raising=False)
    monkeypatch.delenv('DATABASE_URL', raising=False)
    monkeypatch.setattr(database, 'db_manager', None)
