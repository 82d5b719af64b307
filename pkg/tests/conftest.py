import numpy as np
import pytest

from config.experiment_config import StructureParams
from core.ambient import make_flat_set, make_four_corners, make_polygon_set
from core.cube_data import cube_data
from core.dyadic_grid import build_grid
from core.experiment_orchestrator import whitney_depth
from core.experiments import central_cube
from core.fields import catalog_field
from core.structures import build_structure
from core.whitney import Window, decompose, reach_window

FLAT_K_MAX = 3


@pytest.fixture(scope="session")
def flat():
    return make_flat_set()


@pytest.fixture(scope="session")
def square():
    return make_polygon_set([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


@pytest.fixture(scope="session")
def four_corners():
    return make_four_corners(3)


@pytest.fixture(scope="session")
def flat_grid(flat):
    return build_grid(flat, 0, FLAT_K_MAX, window=(-1.0, 1.0))


@pytest.fixture(scope="session")
def flat_whitney(flat, flat_grid):
    eta = StructureParams().eta
    roots = [flat_grid[qid] for qid in flat_grid.roots]
    window = reach_window(Window((-4.0, -4.0), (4.0, 4.0)), np.array([q.center for q in roots]),
                          np.array([q.length for q in roots]), eta)
    return decompose(flat, window, whitney_depth(FLAT_K_MAX, eta))


@pytest.fixture(scope="session")
def flat_structure(flat_grid, flat_whitney):
    return build_structure(flat_grid, flat_whitney, "adr", StructureParams())


@pytest.fixture(scope="session")
def coordinate():
    return catalog_field("coordinate")


@pytest.fixture(scope="session")
def flat_table(flat_structure, coordinate):
    return cube_data(flat_structure, coordinate.gradient_norm(), coordinate, quadrature_level=1)


@pytest.fixture(scope="session")
def q0(flat_grid):
    return central_cube(flat_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
