import numpy as np
import pytest

from core.errors import InputError, UnsupportedDimensionError
from core.regions import Region, region_boundary


@pytest.fixture
def domino():
    return Region(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 1.0], [2.0, 1.0]]), label="domino")


def test_area_and_perimeter_of_touching_boxes(domino):
    assert domino.area() == pytest.approx(2.0)
    assert domino.perimeter == pytest.approx(6.0)


def test_shared_faces_are_interior(domino):
    inside = domino.contains(np.array([[0.5, 0.5], [1.0, 0.5], [0.0, 0.5], [3.0, 3.0]]))
    assert inside.tolist() == [True, True, False, False]
    assert domino.contains_closed(np.array([[0.0, 0.5]])).tolist() == [True]


def test_region_boundary_measure(domino):
    boundary = region_boundary(domino)
    assert boundary.length == pytest.approx(6.0)
    assert boundary.label == "domino"
    # a small ball centered on the bottom edge meets a diameter of it
    assert boundary.measure(np.array([[0.5, 0.0]]), 0.25)[0] == pytest.approx(0.5)


def test_empty_region():
    empty = Region.empty(label="nothing")
    assert empty.area() == 0.0
    assert not empty.contains(np.array([[0.0, 0.0]]))[0]


def test_boundary_needs_a_planar_region():
    cube = Region(np.zeros((1, 3)), np.ones((1, 3)))
    with pytest.raises(UnsupportedDimensionError):
        region_boundary(cube)


def test_degenerate_boxes_are_rejected():
    with pytest.raises(InputError):
        Region(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
