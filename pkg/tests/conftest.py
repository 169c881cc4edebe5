"""Shared fixtures.

Every in-process call to ``fit`` is recorded so the suite-wide
monotonicity check (run last) can inspect all fits made by all tests.
"""

import functools

import pytest

import cosgamma
import cosgamma.cli
import cosgamma.em

FIT_LOG = []

_original_fit = cosgamma.em.fit


@functools.wraps(_original_fit)
def _recording_fit(*args, **kwargs):
    report = _original_fit(*args, **kwargs)
    FIT_LOG.append(report)
    return report


cosgamma.em.fit = _recording_fit
cosgamma.fit = _recording_fit
cosgamma.cli.fit = _recording_fit


def pytest_configure(config):
    config.addinivalue_line("markers", "run_last: run after every other test")
    config.addinivalue_line("markers", "slow: long-running statistical experiment")


def pytest_collection_modifyitems(session, config, items):
    last = [it for it in items if it.get_closest_marker("run_last")]
    rest = [it for it in items if not it.get_closest_marker("run_last")]
    items[:] = rest + last


@pytest.fixture
def fit_log():
    return FIT_LOG


# --- acceptance bookkeeping ------------------------------------------------------

ACCEPTANCE_IDS = [f"AC{i}" for i in range(1, 11)]
ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` and print the verdict line."""

    def record(criterion, passed, detail):
        line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
        ACCEPTANCE[criterion] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    ran = any(it for it in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
              if "test_acceptance" in it.nodeid)
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for cid in ACCEPTANCE_IDS:
        terminalreporter.write_line(ACCEPTANCE.get(cid, f"{cid} FAIL: no result recorded (not run or errored)"))
