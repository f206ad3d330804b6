import pytest

ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "::test_criterion_" not in report.nodeid:
        return
    ACCEPTANCE_RESULTS[report.nodeid] = (
        "PASS" if report.outcome == "passed" else report.outcome.upper(),
        getattr(report, "acceptance_label", ""),
    )


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(ACCEPTANCE_RESULTS):
        outcome, _ = ACCEPTANCE_RESULTS[nodeid]
        name = nodeid.split("::")[-1].replace("test_criterion_", "criterion ")
        terminalreporter.write_line(f"{name}: {outcome}")
