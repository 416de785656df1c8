import math
from functools import lru_cache

import numpy as np
import pytest

from flatsurge import fixtures
from flatsurge.sampler import sample_batch


def hexagon_pair():
    """Two regular hexagonal tori slit along one side and reglued crosswise: H(1,1)."""
    sides = [np.exp(1j * k * math.pi / 3) for k in range(6)]
    pairs = [((0, 0), (1, 3)), ((1, 0), (0, 3))]
    for p in (0, 1):
        pairs += [((p, 1), (p, 4)), ((p, 2), (p, 5))]
    return fixtures.from_polygons([sides, sides], pairs)


@lru_cache(maxsize=None)
def samples(kappa, count, seed=11):
    out, _ = sample_batch(kappa, count, seed)
    return tuple(out)


@pytest.fixture
def octagon():
    return fixtures.regular_octagon()


@pytest.fixture
def torus():
    return fixtures.square_torus()


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE: dict = {}


def record_verdict(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
