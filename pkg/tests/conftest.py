from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                if getattr(report, "when", "call") == "call" or status == "error":
                    rows[nodeid.split("::")[-1]] = status
    if rows:
        terminalreporter.section("acceptance criteria")
        for name in sorted(rows):
            verdict = "PASS" if rows[name] == "passed" else "FAIL"
            terminalreporter.write_line(f"{verdict}  {name}")
