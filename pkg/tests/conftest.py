import pytest

from setarwave.setar import NoiseSpec, Regime, SetarModel

_ACCEPTANCE: dict[str, str] = {}
_NOTES: dict[str, str] = {}


def uniform_regime(coef, intercept=0.0, bound=1.0):
    return Regime(intercept, (coef,), NoiseSpec("uniform", 1.0, bound))


@pytest.fixture
def two_regime():
    """x_t = 0.6 x_{t-1} + e if x_{t-2} <= 0 else -0.6 x_{t-1} + e, e ~ U[-1, 1]."""
    return SetarModel((uniform_regime(0.6), uniform_regime(-0.6)), (0.0,), delay=2, delay_bound=4)


@pytest.fixture
def null_ar1():
    return SetarModel((uniform_regime(0.6),), (), delay=2, delay_bound=4)


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance summary line of the current test."""

    def _note(text):
        _NOTES[request.node.name] = text

    return _note


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[2]) if n.split("_")[2].isdigit() else 99):
        detail = _NOTES.get(name, "")
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}" + (f"  [{detail}]" if detail else ""))
