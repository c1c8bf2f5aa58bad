import re
import warnings

import pytest

from catbounds.catalog import example_model, example_weights
from catbounds.bounds import build_report

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def corrected():
    return example_model("corrected")


@pytest.fixture(scope="session")
def published():
    return example_model("published")


@pytest.fixture(scope="session")
def corrected_report(corrected):
    return build_report(corrected, example_weights(), 200)


@pytest.fixture(autouse=True)
def _quiet_tail_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="mass .* in states above")
        yield


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[int(m.group(1))] = (m.group(2), report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        name, outcome = _ACCEPTANCE[k]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {verdict}  {name.replace('_', ' ')}")
