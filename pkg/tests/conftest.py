"""Shared fixtures and the acceptance summary hook."""

import pytest

from setprob import HF_MODE, ORDINAL_MODE, make_universe

# Populated by tests/test_acceptance.py: criterion number -> (label, passed).
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool]] = {}


@pytest.fixture(scope="session")
def ord_universe():
    return make_universe(ORDINAL_MODE, 3)


@pytest.fixture(scope="session")
def hf_universe():
    return make_universe(HF_MODE, 5)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        label, ok = ACCEPTANCE_RESULTS[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{status}] {label}")
