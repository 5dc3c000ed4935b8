import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "fixed",
    max_examples=100,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    database=None,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fixed"))

# one PASS/FAIL line per acceptance criterion in the terminal summary
ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_ac" in report.nodeid:
        tag = "AC" + report.nodeid.split("::test_ac", 1)[1].split("_", 1)[0]
        ACCEPTANCE.setdefault(tag, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    import sys

    details = getattr(sys.modules.get("test_acceptance"), "DETAILS", {})
    terminalreporter.section("acceptance criteria")
    for tag in sorted(ACCEPTANCE, key=lambda t: int(t[2:])):
        terminalreporter.write_line(f"{tag} {ACCEPTANCE[tag]}: {details.get(tag, 'no result recorded')}")
