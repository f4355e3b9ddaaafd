import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_collection(kind="regression", m=4, n=40, d=3, seed=0, n_classes=2):
    from rmbcle.data import MultiTaskCollection

    g = np.random.default_rng(seed)
    Xs = [g.uniform(-1, 1, (n + i, d)) for i in range(m)]
    if kind == "regression":
        ys = [np.sin(3 * X[:, 0]) * (1 + i % 2) + X[:, 1] for i, X in enumerate(Xs)]
    else:
        ys = [(g.integers(0, n_classes, len(X))) for X in Xs]
        for y in ys:
            y[: n_classes] = np.arange(n_classes)
    return MultiTaskCollection.from_arrays(Xs, ys, kind)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
