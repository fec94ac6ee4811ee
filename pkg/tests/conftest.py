import warnings

import numpy as np
import pytest

from lipmax.extension import build_bump, compute_k1
from lipmax.meshes import unit_cube_mesh, wedge_mesh

# criterion number -> (passed, summary line); filled by test_acceptance
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def bump():
    return build_bump()


@pytest.fixture(scope="session")
def k1(bump):
    return compute_k1(bump).k1


@pytest.fixture(scope="session")
def cube1():
    return unit_cube_mesh(1)


@pytest.fixture(scope="session")
def cube2():
    return unit_cube_mesh(2)


@pytest.fixture(scope="session")
def wedge_quarter():
    return wedge_mesh(np.pi / 2, n=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
