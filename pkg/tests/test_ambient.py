import numpy as np
import pytest

from core.ambient import (corkscrew, estimate_adr, make_graph_set, make_polygon_set, measured_corkscrew_constant,
                          set_from_config)
from core.errors import InputError


def test_flat_line_is_exactly_ahlfors_regular(flat):
    adr = estimate_adr(flat, 0.01, 1.0, 64, seed=3)
    assert adr.c_lower == pytest.approx(2.0)
    assert adr.c_upper == pytest.approx(2.0)
    assert adr.ratio == pytest.approx(1.0)


def test_adr_rejects_radius_beyond_diameter(square):
    with pytest.raises(InputError):
        estimate_adr(square, 0.1, 2.0, 16)


def test_graph_breakpoints_must_increase():
    with pytest.raises(InputError):
        make_graph_set([(0.0, 0.0), (0.0, 1.0)])


def test_self_intersecting_polygon_is_rejected():
    with pytest.raises(InputError):
        make_polygon_set([(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)])


def test_clockwise_polygon_is_reoriented():
    cw = make_polygon_set([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])
    assert cw.side(np.array([[0.5, 0.5]]))[0] == 1
    assert cw.side(np.array([[2.0, 0.5]]))[0] == -1


def test_square_perimeter_and_distance(square):
    assert square.perimeter == pytest.approx(4.0)
    d = square.distance(np.array([[0.5, 0.5], [2.0, 0.5], [0.5, 0.0]]))
    assert d == pytest.approx([0.5, 1.0, 0.0])


def test_graph_sides(flat):
    sides = flat.side(np.array([[0.0, 1.0], [0.0, -1.0], [3.0, 0.0]]))
    assert sides.tolist() == [1, -1, 0]


def test_four_corners_total_measure(four_corners):
    assert len(four_corners.squares) == 4 ** 3
    m = four_corners.measure(np.array([[0.5, 0.5]]), 1.0)
    assert m[0] == pytest.approx(1.0)


def test_set_round_trips_through_describe(square):
    again = set_from_config(square.describe())
    assert np.allclose(again.vertices, square.vertices)


def test_unknown_set_kind():
    with pytest.raises(InputError):
        set_from_config({"kind": "sphere"})


def test_corkscrew_on_flat_plus_side(flat):
    x, r = np.array([0.25, 0.0]), 0.5
    X = corkscrew(flat, x, r, side="plus")
    assert X[1] > 0
    assert measured_corkscrew_constant(flat, x, r, X) <= flat.corkscrew_constant


def test_corkscrew_side_needs_a_two_sided_set(four_corners):
    with pytest.raises(InputError):
        corkscrew(four_corners, np.array([0.1, 0.1]), 0.25, side="plus")
