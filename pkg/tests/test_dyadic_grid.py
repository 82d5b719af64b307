import numpy as np
import pytest

from core.dyadic_grid import build_grid, build_net_grid, dyadic_maximal, thin_boundary_exponent, thin_boundary_ratio
from core.errors import InputError
from tests.conftest import FLAT_K_MAX


def test_flat_generations_tile_the_window(flat_grid):
    for k in range(0, FLAT_K_MAX + 1):
        gen = flat_grid.generation(k)
        assert len(gen) == 2 ** (k + 1)
        assert sum(flat_grid[q].measure for q in gen) == pytest.approx(2.0)
        assert all(flat_grid[q].measure == pytest.approx(2.0 ** -k) for q in gen)
    assert flat_grid.check_nesting()


def test_parents_and_ancestors(flat_grid):
    leaf = flat_grid.generation(FLAT_K_MAX)[5]
    chain = flat_grid.ancestors(leaf)
    assert chain[0] == leaf
    assert [c[0] for c in chain] == list(range(FLAT_K_MAX, -1, -1))
    assert flat_grid.is_descendant(leaf, chain[-1])
    assert flat_grid.ancestor_at(leaf, 1) == chain[-2]


def test_locate_finds_the_cube_containing_a_point(flat_grid):
    found = flat_grid.locate(np.array([[0.3, 0.0]]), FLAT_K_MAX)[0]
    t0, t1 = flat_grid[found].interval
    assert t0 <= 0.3 < t1


def test_ball_radius_stays_inside_the_cube(flat_grid):
    for q in flat_grid.cubes.values():
        assert 0 < q.radius <= q.length / 4.0 + 1e-15


def test_polygon_top_cube(square):
    grid = build_grid(square, -2, 2)
    assert grid.top_cube == (-2, 0)
    assert grid[grid.top_cube].measure == pytest.approx(4.0)
    assert grid.check_nesting()


def test_polygon_k_min_cannot_exceed_the_boundary(square):
    with pytest.raises(InputError):
        build_grid(square, -3, 1)


def test_four_corners_generations(four_corners):
    grid = build_grid(four_corners, 0, 20)
    assert grid.k_max == 2 * four_corners.level
    for k in range(grid.k_min, grid.k_max + 1):
        assert sum(grid[q].measure for q in grid.generation(k)) == pytest.approx(1.0)
    # odd generations repeat the node box of their parent
    assert len(grid.generation(1)) == len(grid.generation(0)) == 1
    assert len(grid.generation(2)) == 4


def test_generation_range_is_checked(flat):
    with pytest.raises(InputError):
        build_grid(flat, 3, 1)


def test_boundary_samples_carry_the_cube_measure(flat_grid, q0):
    samples = flat_grid.boundary_samples(q0, per_leaf=4)
    assert samples.weights.sum() == pytest.approx(flat_grid[q0].measure)
    assert len(samples) == 4 * 2 ** FLAT_K_MAX
    assert all(flat_grid.is_descendant(tag, q0) for tag in samples.leaf)


def test_maximal_function_of_a_constant(flat_grid, q0):
    samples = flat_grid.boundary_samples(q0)
    M = dyadic_maximal(flat_grid, samples, np.full(len(samples), 3.0), q0, p=2.0)
    assert M == pytest.approx(np.full(len(samples), 3.0))


def test_maximal_function_dominates_the_average(flat_grid, q0):
    samples = flat_grid.boundary_samples(q0)
    f = np.where(samples.points[:, 0] < -0.75, 1.0, 0.0)
    M = dyadic_maximal(flat_grid, samples, f, q0)
    avg = float(np.sum(f * samples.weights) / samples.weights.sum())
    assert np.all(M >= avg - 1e-12)
    assert np.all(M >= f)


def test_cube_ball_sits_inside_the_cube(flat_grid):
    for qid in flat_grid.generation(2):
        x, r, C = flat_grid.cube_ball(qid)
        t0, t1 = flat_grid[qid].interval
        assert t0 - 1e-12 <= x[0] - 2 * r and x[0] + 2 * r <= t1 + 1e-12
        assert C * r >= max(x[0] - t0, t1 - x[0]) - 1e-12


def test_thin_boundary_of_an_interior_interval(flat_grid):
    qid = flat_grid.generation(2)[2]
    assert thin_boundary_ratio(flat_grid, qid, 0.25) == pytest.approx(0.5, rel=1e-2)
    assert thin_boundary_ratio(flat_grid, qid, 0.125) < thin_boundary_ratio(flat_grid, qid, 0.25)
    gamma, r2 = thin_boundary_exponent(flat_grid, flat_grid.generation(2)[2:6])
    assert gamma == pytest.approx(1.0, abs=0.05)
    assert r2 > 0.99
    with pytest.raises(InputError):
        thin_boundary_ratio(flat_grid, qid, 1.0)


def test_four_corners_boxes_have_no_thin_boundary(four_corners):
    grid = build_grid(four_corners, 0, 4)
    assert all(thin_boundary_ratio(grid, q, 0.5) == 0.0 for q in grid.generation(2))


def test_net_grid_nests_and_covers():
    pts = np.column_stack([np.linspace(0.0, 1.0, 17), np.zeros(17)])
    grid = build_net_grid(pts, np.full(17, 1.0 / 17), 0, 3)
    assert grid.check_nesting()
    for k in range(0, 4):
        gen = grid.generation(k)
        assert sum(grid[q].measure for q in gen) == pytest.approx(1.0)
        for qid in gen:
            q = grid[qid]
            assert np.all(np.hypot(*(pts[q.members] - q.center).T) < 2.0 ** -k)
    with pytest.raises(InputError):
        build_net_grid(np.zeros((0, 2)), np.zeros(0), 0, 2)
