import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("lab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def ring3():
    from hamem.operators import HamiltonianSpec, build_hamiltonian, diagonalize

    h = build_hamiltonian(HamiltonianSpec("ring", 3, nu_z=4, nu_x=1, J=4))
    return h, diagonalize(h)


@pytest.fixture(scope="session")
def ring4():
    from hamem.operators import HamiltonianSpec, build_hamiltonian, diagonalize

    h = build_hamiltonian(HamiltonianSpec("ring", 4, nu_z=4, nu_x=1, J=4))
    return h, diagonalize(h)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line, then fail the test if the check did not hold."""

    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
