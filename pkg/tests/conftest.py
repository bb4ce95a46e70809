import functools

import pytest

from alphacf.mapcore import AlphaMap
from alphacf.transfer import invariant_density

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@functools.lru_cache(maxsize=None)
def density(alpha: float, n_cells: int = 4096):
    """Invariant densities are reused across test modules."""
    return invariant_density(AlphaMap(alpha), n_cells)


@pytest.fixture
def dens():
    return density


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
