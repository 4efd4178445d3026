import numpy as np
import pytest

from dbcontrol.assembly import assemble_problem
from dbcontrol.mesh import build_mesh
from dbcontrol.targets import HARM2D, HARM3D

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion")
    config.addinivalue_line("markers", "property: fast invariant suite")
    config.addinivalue_line("markers", "acceptance: end-to-end reproduction checks")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    detail = dict(report.user_properties).get("detail", "")
    _criteria.append((label, report.outcome.upper(), detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, detail in sorted(_criteria):
        mark = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line("[{}] criterion {}: {}".format(mark, label, detail))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _problem(domain, level, target, rho=None):
    mesh = build_mesh(domain, level)
    if rho is None:
        rho = mesh.nominal_h ** 2
    return assemble_problem(mesh, target, rho)


@pytest.fixture
def square1():
    return _problem("square", 1, HARM2D)


@pytest.fixture
def square2():
    return _problem("square", 2, HARM2D)


@pytest.fixture
def cube1():
    return _problem("cube", 1, HARM3D)


@pytest.fixture
def make_problem():
    return _problem
