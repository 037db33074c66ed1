import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(Path(__file__).parent))

_VERDICTS = []


@pytest.fixture
def samples_dir():
    return ROOT / "samples"


@pytest.fixture
def record(request):
    """Attach a one-line measurement to the current acceptance verdict."""

    def _record(text):
        request.node.user_properties.append(("detail", text))

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or (rep.skipped and rep.when == "setup")):
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    if rep.skipped:
        status = "SKIP"
        if not detail and isinstance(rep.longrepr, tuple):
            detail = str(rep.longrepr[-1])
    else:
        status = "PASS" if rep.passed else "FAIL"
    _VERDICTS.append((marker.args[0], status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(_VERDICTS):
        terminalreporter.write_line(f"{status} {name}: {detail}")
