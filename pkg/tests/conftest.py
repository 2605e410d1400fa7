import pytest
from hypothesis import HealthCheck, settings

from transexp.series import Series

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True, scope="session")
def strict_series_order():
    """Every lazily produced series term is checked to be strictly below its predecessor."""
    Series.check_order = True
    yield
    Series.check_order = False


_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion[" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("[", 1)[1].rstrip("]")
        summary = dict(report.user_properties).get("summary", "")
        if report.outcome != "passed":
            summary = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else str(report.longrepr)
        _ACCEPTANCE[name] = ("PASS" if report.outcome == "passed" else "FAIL", summary)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.rsplit("_", 1)[1])):
        status, summary = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{name.replace('_', ' ')}: {status}  {summary}")
