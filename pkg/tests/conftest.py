import sys
from pathlib import Path

import pytest

from spdcsim.dispersion import load_crystal
from spdcsim.phasematching import InteractionSpec

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def ktp():
    return load_crystal("KTP")


@pytest.fixture(scope="session")
def bbo():
    return load_crystal("BBO")


@pytest.fixture(scope="session")
def yyz():
    return InteractionSpec("ncpm", "yyz")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
