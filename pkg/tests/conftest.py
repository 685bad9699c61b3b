import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("pdflow", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("pdflow")

# criterion number -> "PASS"/"FAIL" line, filled by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
