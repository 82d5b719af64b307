import numpy as np
import pytest

from core.errors import CoverageError, InputError
from core.whitney import Window, decompose, dilate, reach_window


def test_every_cube_satisfies_the_whitney_display(flat_whitney):
    assert len(flat_whitney) > 0
    assert np.all(flat_whitney.check_display())


def test_cubes_are_disjoint(flat_whitney):
    assert np.array_equal(flat_whitney.locate(flat_whitney.center), np.arange(len(flat_whitney)))


def test_touching_cubes_have_comparable_sides(flat_whitney):
    ratios = flat_whitney.side_ratios()
    assert len(ratios) > 0
    assert np.all(ratios <= 4.0 + 1e-9)
    assert np.all(ratios >= 0.25 - 1e-9)


def test_emitted_sides_respect_the_depth(flat_whitney):
    assert flat_whitney.side.min() >= 2.0 ** -flat_whitney.depth
    assert flat_whitney.truncated_area > 0


def test_points_near_the_set_are_outside_the_coverage(flat_whitney):
    with pytest.raises(CoverageError):
        flat_whitney.containing_cube([0.0, 1e-9])
    i = flat_whitney.containing_cube([0.1, 2.0])
    assert flat_whitney.lo[i][1] <= 2.0 < flat_whitney.hi[i][1]


def test_small_dilations_keep_touching_cubes_apart(flat_whitney):
    assert flat_whitney.dilation_separation(2.0 ** -6)


def test_dilation_grows_the_box():
    lo, hi = dilate(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]), 2.0 ** -4)
    assert hi[0] - lo[0] == pytest.approx([1.0625, 1.0625])
    with pytest.raises(InputError):
        dilate(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]), 0.25)


def test_depth_is_validated(flat):
    with pytest.raises(InputError):
        decompose(flat, Window((-1.0, -1.0), (1.0, 1.0)), 0)


def test_records_are_sorted_by_level(flat_whitney):
    rows = flat_whitney.records()
    levels = [row["k"] for row in rows]
    assert levels == sorted(levels)


def test_points_above_the_coverage_floor_are_covered(flat_whitney):
    W = flat_whitney
    floor = W.coverage_floor
    assert floor == pytest.approx(16.0 * np.sqrt(2.0) * 2.0 ** -W.depth)
    x = np.linspace(-3.0, 3.0, 41)
    for height in (floor, 1.5 * floor, 4.0):
        for sign in (1.0, -1.0):
            points = np.column_stack([x, np.full_like(x, sign * height)])
            assert np.all(W.locate(points) >= 0)


def test_reach_window_holds_the_base_cube_sides(flat):
    narrow = Window((-4.0, -4.0), (4.0, 4.0))
    wide = reach_window(narrow, np.array([[-0.5, 0.0], [0.5, 0.0]]), np.array([1.0, 1.0]), 2.0 ** -8)
    # side 1/4 cubes over the flat line sit at heights in [4, 8)
    assert wide.hi[1] >= 8.0 and wide.lo[1] <= -8.0
    assert reach_window(wide, np.zeros((0, 2)), np.zeros(0), 2.0 ** -8) == wide
    W = decompose(flat, wide, 5)
    assert np.any(W.side >= 0.25)
