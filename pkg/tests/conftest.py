"""Shared fixtures: shipped chains and a fresh solver"""

import os
import tempfile
from pathlib import Path

# keep API runs out of the project's logs/ directory
os.environ.setdefault("MG1_RUN_LOG_FILE", str(Path(tempfile.gettempdir()) / "mg1-test-runs.csv"))

import pytest  # noqa: E402

from app.config import DATA_DIR  # noqa: E402
from app.services.cache import HeadCache  # noqa: E402
from app.services.model import MG1Spec  # noqa: E402
from app.services.pipeline import ChainSolver  # noqa: E402
from tests.chains import load_chain  # noqa: E402


@pytest.fixture(scope="session")
def s1_spec() -> MG1Spec:
    """Birth-death chain: up 0.4, down 0.6"""
    return load_chain(DATA_DIR / "s1.json")


@pytest.fixture(scope="session")
def s2_spec() -> MG1Spec:
    """Scalar heavy-tailed chain, gamma = 3"""
    return load_chain(DATA_DIR / "s2.json")


@pytest.fixture(scope="session")
def two_phase_spec() -> MG1Spec:
    return load_chain(DATA_DIR / "two_phase.json")


@pytest.fixture
def solver() -> ChainSolver:
    return ChainSolver(cache=HeadCache(enabled=True))
