from pathlib import Path

import numpy as np
import pytest

from weighted_bvp.services.grid_problem import (
    ProblemInstance,
    make_weight_grid,
    random_weight_grid,
    uniform_weight_grid,
)
from weighted_bvp.services.nonlinearity import NonlinearitySpec

FIXTURES = Path(__file__).parent / "fixtures"

UNIT_DENSE = np.array(
    [
        [2.0, -1.0, -1.0, 0.0],
        [-1.0, 3.0, 0.0, -1.0],
        [-1.0, 0.0, 3.0, -1.0],
        [0.0, -1.0, -1.0, 4.0],
    ]
)
SQRT5 = np.sqrt(5.0)

# kernels with closed-form primitives, as (kind, params)
CATALOGUE = [
    ("linear", {"slope": 2.0}),
    ("cubic_softening", {}),
    ("power", {"s": 1.5, "gamma": 1.5}),
    ("power", {"s": 1.0, "gamma": 3.0}),
    ("rational_quartic", {}),
    ("damped_quadratic", {}),
]


def make_instance(grid, kind, params=None, coefficient=None, primitive_mode="closed_form"):
    spec = NonlinearitySpec(
        kind=kind, params=params or {}, coefficient=coefficient, primitive_mode=primitive_mode
    )
    return ProblemInstance(grid=grid, nonlinearity=spec)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def unit_grid():
    return make_weight_grid(2, 2, [[0, 0, 0], [0, 1, 1], [0, 1, 1]])


@pytest.fixture
def single_grid():
    return uniform_weight_grid(1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_instances(rng):
    """One random admissible instance per catalogue kernel, grids up to 5 x 5."""
    out = []
    for kind, params in CATALOGUE:
        m, n = (int(v) for v in rng.integers(1, 6, size=2))
        grid = random_weight_grid(m, n, rng, low=0.2, high=5.0)
        out.append(make_instance(grid, kind, params))
    return out
