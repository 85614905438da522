import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gr2n.data import Scene  # noqa: E402


def random_scene(rng, n, F, K, p_label=0.8, scene_id="s"):
    feats = rng.normal(size=(n, F))
    labels = {}
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p_label:
                labels[(i, j)] = int(rng.integers(K))
    return Scene(scene_id, feats, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
