import numpy as np

from core.segments import points_in_polygon, segments_intersect


def test_points_in_a_concave_polygon():
    # an L shape: the unit square with its upper right quarter removed
    L = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]])
    points = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75], [1.5, 0.25], [-0.5, 0.5]])
    assert points_in_polygon(points, L).tolist() == [True, True, True, False, False, False]
    assert points_in_polygon(points, L[::-1]).tolist() == [True, True, True, False, False, False]


def test_points_on_the_extension_of_an_edge_are_outside():
    square = np.array([[-1.0, 0.0], [0.0, 0.0], [0.0, 0.5], [-1.0, 0.5]])
    assert not np.any(points_in_polygon(np.array([[-1.5, 0.0], [0.5, 0.0]]), square))


def test_segment_intersections():
    a, b = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    assert segments_intersect(a, b, np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert segments_intersect(a, b, np.array([1.0, 1.0]), np.array([2.0, 0.0]))
    assert not segments_intersect(a, b, np.array([2.0, 2.0]), np.array([3.0, 3.0]))
