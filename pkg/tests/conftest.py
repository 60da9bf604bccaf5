import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kwsbench import frontend  # noqa: E402

DATA = Path(__file__).parent / "data"

_acceptance_lines = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    def record(label, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _acceptance_lines.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_dataset(root, classes, clips_per_class, seed=0):
    """Write ``<root>/<class>/<i>.wav`` noise clips; returns root."""
    gen = np.random.default_rng(seed)
    for name in classes:
        (root / name).mkdir(parents=True, exist_ok=True)
        for i in range(clips_per_class):
            frontend.write_wav(root / name / f"{i:03d}.wav",
                               0.3 * gen.standard_normal(16000).clip(-3, 3) / 3)
    return root


@pytest.fixture
def dataset(tmp_path):
    return make_dataset(tmp_path / "data", ["no", "yes"], 3)
