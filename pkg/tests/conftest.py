import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from divann import dataio
from divann.hnsw import build_index
from divann.vectors import Metric


@pytest.fixture(scope="session")
def gaussian_2k():
    return dataio.generate(dataio.SyntheticSpec(2000, 16, "gaussian", 11), Metric.L2SIM)


@pytest.fixture(scope="session")
def index_2k(gaussian_2k):
    return build_index(gaussian_2k, M=16, ef_construction=200, seed=0)


@pytest.fixture(scope="session")
def queries_2k():
    return dataio.generate_vectors(dataio.SyntheticSpec(200, 16, "gaussian", 12))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
