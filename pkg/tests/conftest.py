import pytest

from rstab.ambient import cosh_warped_spec, exp_warped_spec, make_warped
from rstab.geometries import ellipsoid_leaf, sphere_leaf, warped_slice

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def unit_sphere():
    return sphere_leaf(2, 1.0, 32)


@pytest.fixture(scope="session")
def ellipsoid():
    return ellipsoid_leaf(size=64)


@pytest.fixture(scope="session")
def exp_spec():
    return exp_warped_spec(2, 0.5)


@pytest.fixture(scope="session")
def exp_slice(exp_spec):
    return warped_slice(exp_spec, 0.3, chart=make_warped(exp_spec))


@pytest.fixture(scope="session")
def cosh_slice():
    spec = cosh_warped_spec(2, -1.0)
    return warped_slice(spec, 0.5)
