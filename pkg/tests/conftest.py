from __future__ import annotations

import pytest

# criterion number -> (description, passed); filled by the acceptance tests
# and printed as one line each at the end of the run
_RESULTS: dict[int, tuple[str, bool]] = {}


@pytest.fixture
def acceptance():
    def record(criterion: int, description: str, passed: bool) -> None:
        _RESULTS[criterion] = (description, passed)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        desc, ok = _RESULTS[k]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE criterion {k}: {verdict} - {desc}")
