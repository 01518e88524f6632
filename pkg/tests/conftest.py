import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from personnet.data import load_manifest, synth_dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """The seed-fixed 20 identity x 4 image x 2 view synthetic corpus."""
    root = tmp_path_factory.mktemp("corpus") / "synth"
    return load_manifest(synth_dataset(root, 20, 4, 40, 20, seed=0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
