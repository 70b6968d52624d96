import pytest

from qmsderiv.problems import parse_problem, presets

# outcome per acceptance criterion, filled by the logreport hook
_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        parts = name.split("_")
        label = " ".join(parts[3:])
        status = "PASS" if _CRITERIA[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {parts[2]} ({label}): {status}")


@pytest.fixture(scope="session")
def preset_table():
    return presets()


@pytest.fixture(scope="session")
def preset_problems(preset_table):
    return {pid: parse_problem(p.problem) for pid, p in preset_table.items()}
