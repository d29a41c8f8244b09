import os
from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"
CZECH = DATA_DIR / "czech.csv"

_acceptance: dict[str, list[tuple[str, str]]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    # One line per acceptance criterion: collect outcomes from the call phase
    # (or setup, for skips) of tests marked with a criterion id.
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        if hasattr(report, "wasxfail"):
            outcome = "FAIL (known)" if report.skipped else "PASS (unexpected)"
        elif report.passed:
            outcome = "PASS"
        elif report.skipped:
            outcome = "SKIP"
        else:
            outcome = "FAIL"
        _acceptance.setdefault(crit, []).append((report.nodeid.split("::")[-1], outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = str(marker.args[0])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion identifier")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def sort_key(c):
        head = "".join(ch for ch in c if ch.isdigit())
        return (int(head or 0), c)

    for crit in sorted(_acceptance, key=sort_key):
        for name, outcome in _acceptance[crit]:
            tr.write_line(f"criterion {crit:<3} {outcome:<18} {name}")
