import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ampere_lab.grid import ScalarField, box
from ampere_lab.structure import ModelSpec, make_hermitian_form, make_structure

settings.register_profile("lab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")

STANDARD = ModelSpec("standard")
TWIST = ModelSpec("twist", 0.5)


def r2(x1, x2, x3, x4):
    return x1 * x1 + x2 * x2 + x3 * x3 + x4 * x4


def setting(model, half, n, rho=None):
    dom = box(half, n, rho)
    J = make_structure(model, dom)
    return dom, J, make_hermitian_form(J)


def field(dom, fn):
    return ScalarField.from_function(dom, fn)


@pytest.fixture(scope="session")
def twist17():
    return setting(TWIST, 0.4, 17)


@pytest.fixture(scope="session")
def standard17():
    return setting(STANDARD, 0.4, 17)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    return request.config.stash.setdefault(_ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        passed, detail = results[key]
        terminalreporter.write_line(f"AC{key:<2} {'PASS' if passed else 'FAIL'}  {detail}")
