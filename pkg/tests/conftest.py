import numpy as np
import pytest

from eulersynth.benchmarks import build_mri, build_toy_1d, build_toy_2d
from eulersynth.dynamics import AffineField, Box, SwitchedSystem
from eulersynth.synthesis import prepare


def random_contractive_affine(rng, dim=2, n_modes=2, tau=0.1, rate=(0.5, 3.0)):
    """Affine modes whose symmetric part is negative definite."""
    modes = []
    for _ in range(n_modes):
        S = rng.standard_normal((dim, dim))
        S = -(S @ S.T) / dim - rng.uniform(*rate) * np.eye(dim)
        W = rng.standard_normal((dim, dim))
        A = S + (W - W.T) / 2
        b = rng.uniform(-0.5, 0.5, dim)
        modes.append(AffineField(A, b))
    return SwitchedSystem("random", Box.cube(-1.0, 1.0, dim), tuple(modes), tau)


@pytest.fixture(scope="session")
def toy1d():
    return build_toy_1d()


@pytest.fixture(scope="session")
def toy2d():
    return build_toy_2d()


@pytest.fixture(scope="session")
def mri():
    return build_mri()


@pytest.fixture(scope="session")
def mri_prepared(mri):
    return prepare(mri.system, mri.grid(), mri.cost, mri.k)


@pytest.fixture
def acceptance(request):
    """``acceptance(n, ok, detail)`` records one criterion line and prints it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
