import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# criterion number -> {"title", "outcome", "detail"}
_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion test")


@pytest.fixture
def record_detail(request):
    """Attach a one-line measurement to the current criterion's summary line."""
    marker = request.node.get_closest_marker("criterion")

    def record(text: str):
        if marker is not None:
            _CRITERIA.setdefault(marker.args[0], {"title": marker.args[1]})["detail"] = text
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _CRITERIA.setdefault(marker.args[0], {"title": marker.args[1]})
    if rep.when == "setup" and rep.skipped:
        entry["outcome"] = "SKIP"
    elif rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry["outcome"] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        line = f"[{entry.get('outcome', 'NOT RUN'):7}] {number:2d}. {entry['title']}"
        if entry.get("detail"):
            line += f"  ({entry['detail']})"
        terminalreporter.write_line(line)
