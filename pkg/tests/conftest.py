import numpy as np
import pytest

from robinlab.domain import GridFunction, GridSpec
from robinlab.potentials import PotentialSpec, bump, make_potential

LADDER = (16, 32, 64)
ROUNDOFF = 1e-9


def orders(values, ns=LADDER):
    """Observed convergence orders in ``h = 1/(n+1)`` between successive refinements."""
    v = np.asarray(values, dtype=float)
    m = np.asarray(ns, float) + 1
    r = np.log(m[1:] / m[:-1])
    return np.log(v[:-1] / v[1:]) / r


def refines(values, ns=LADDER, min_order=1.0, floor=ROUNDOFF):
    """Decrease at the given order, or every value already at roundoff."""
    v = np.asarray(values, dtype=float)
    if np.all(v <= floor):
        return True
    return bool(np.all(orders(v, ns) >= min_order))


def zero(grid):
    return GridFunction.constant(grid, 0.0)


def bump_on(grid, amplitude=1.0, center=(0.5, 0.5), width=0.1):
    return make_potential(bump(amplitude, center, width), grid)


# an asymmetric pair used wherever two potentials are compared
SPEC_ONE = bump(0.5, (0.42, 0.55), 0.08)
SPEC_TWO = PotentialSpec("multi-bump", ((0.55, 0.47), (0.6, 0.62)), (1.0, -0.5), (0.1, 0.07))


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def record(number, name, ok, detail):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    ACCEPTANCE.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
