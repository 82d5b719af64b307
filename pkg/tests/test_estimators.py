import numpy as np
import pytest

from core.cube_data import CubeDataTable, cube_data
from core.errors import FieldEvaluationError, InputError
from core.estimators import (WhitneyAverage, aperture_ratio, area_dyadic, ball_family, check_area_recursion, cme,
                             cme0, cme_dyadic, cme_joint, dyadic_carleson_ratios, eps_approx_check, local_profile, ntmax_dyadic,
                             safe_ratio, three_norm_constant, trad_functionals)
from core.fields import catalog_field, constant_field
from core.regions import ComplementDomain
from core.stopping import maximal_cubes
from core.whitney import dilate


@pytest.fixture(scope="module")
def plus(flat):
    return ComplementDomain(flat, "plus")


def test_cme_of_the_unit_field_on_a_half_disk(flat, plus):
    result = cme(constant_field(1.0), flat, np.array([[0.0, 0.0, 1.0]]), plus)
    # int over the upper half of the unit disk of y dA
    assert result.value == pytest.approx(2.0 / 3.0, abs=2e-3)
    assert result.witness["r"] == 1.0


def test_cme_rejects_empty_and_degenerate_families(flat, plus):
    with pytest.raises(InputError):
        cme(constant_field(1.0), flat, np.zeros((0, 3)), plus)
    with pytest.raises(InputError):
        cme(constant_field(1.0), flat, np.array([[0.0, 0.0, 0.0]]), plus)


def test_cme0_of_the_unit_field(flat, plus):
    result = cme0(constant_field(1.0), flat, np.array([[0.0, 0.5]]), plus)
    assert result.value == pytest.approx(np.pi * 0.25 ** 2, rel=1e-2)


def test_cme0_needs_points_off_the_set(flat, plus):
    with pytest.raises(InputError):
        cme0(constant_field(1.0), flat, np.array([[0.0, 0.0]]), plus)


def test_joint_run_bounds_cme0_by_cme(flat, plus):
    X = np.array([[0.0, 0.5], [0.3, 0.2]])
    report = cme_joint(constant_field(1.0), flat, X, ball_family(flat, levels=3, centers=5), plus)
    assert report["bound"] == pytest.approx(3.0)
    assert report["holds"]
    assert report["ratio"] <= report["bound"]


def test_ball_family_shape(flat):
    fam = ball_family(flat, levels=3, centers=4, r_max=1.0)
    assert fam.shape == (12, 3)
    assert sorted(set(fam[:, 2])) == [0.25, 0.5, 1.0]
    with pytest.raises(InputError):
        ball_family(flat, levels=0)


def test_dyadic_cme_is_the_largest_ratio(flat_table):
    result = cme_dyadic(flat_table)
    assert result.value == pytest.approx(dyadic_carleson_ratios(flat_table).max())
    assert cme_dyadic(flat_table, fat=True).value >= result.value * (1 - 1e-9)


def test_pointwise_area_matches_the_profile(flat_table, flat_grid, q0):
    profile = local_profile(flat_table, q0)
    centers = np.array([flat_grid[c].center for c in profile.leaves])
    assert area_dyadic(flat_table, centers, q0) == pytest.approx(profile.area)
    assert ntmax_dyadic(flat_table, centers, q0) == pytest.approx(profile.ntmax)


def test_profile_level_sets_and_averages(flat_table, q0):
    profile = local_profile(flat_table, q0)
    assert profile.level_measure(profile.area, -1.0) == pytest.approx(profile.measure)
    assert profile.level_measure(profile.area, profile.area.max()) == 0.0
    assert profile.average(np.ones(len(profile.leaves))) == pytest.approx(1.0)
    with pytest.raises(InputError):
        profile.norm(profile.area, 0.0)


def test_area_recursion_holds(flat_table, flat_grid, q0):
    for kid in flat_grid[q0].children:
        for sub in [kid] + list(flat_grid[kid].children):
            report = check_area_recursion(flat_table, q0, sub)
            assert report["checked"] > 0
            assert report["violations"] == 0


def test_area_recursion_needs_a_proper_descendant(flat_table, q0):
    with pytest.raises(InputError):
        check_area_recursion(flat_table, q0, q0)


def test_traditional_functionals_of_the_height(flat, plus, coordinate):
    r = 0.5
    S, A, N = trad_functionals(coordinate, flat, (0.0, 0.0), 1.0, r, domain=plus)
    # aperture 1 cuts the sector pi/6 < theta < 5 pi/6 out of the disk
    assert S.value == pytest.approx(r * np.sqrt(np.pi / 3.0), rel=1e-9)
    assert A.value == pytest.approx(S.value)
    assert N.value == pytest.approx(r, rel=1e-6)


def test_traditional_functionals_need_a_positive_radius(flat, coordinate):
    with pytest.raises(InputError):
        trad_functionals(coordinate, flat, (0.0, 0.0), 1.0, 0.0)


def test_whitney_average_approximates_the_height(flat, flat_whitney, coordinate):
    phi = WhitneyAverage(flat_whitney, coordinate)
    # heights measured from the coverage floor, below which phi is undefined
    X = np.array([[0.1, 0.3], [-0.2, 0.6], [0.5, 0.9]]) + [0.0, flat_whitney.coverage_floor]
    report = eps_approx_check(coordinate, phi, flat, 1.0, ball_family(flat, levels=2, centers=3), X)
    assert report.gap < 1.0
    assert 0 < report.C_eps < np.inf
    assert report.verdict
    with pytest.raises(InputError):
        eps_approx_check(coordinate, phi, flat, 0.0, ball_family(flat), X)


def test_ratio_helpers():
    assert safe_ratio(0.0, 0.0) == 0.0
    assert safe_ratio(1.0, 0.0) == float("inf")
    assert three_norm_constant(2.0, 0.5, 0.5) == pytest.approx(2.0)


def test_aperture_ratio_of_equal_apertures(flat, plus, coordinate):
    X = np.array([[0.0, 0.0], [0.25, 0.0]])
    same = aperture_ratio(coordinate, flat, 1.0, 1.0, 2.0, X, 0.5, domain=plus)
    assert same["N_ratio"] == pytest.approx(1.0)
    assert same["A_ratio"] == pytest.approx(1.0)
    wide = aperture_ratio(coordinate, flat, 1.0, 3.0, 2.0, X, 0.5, domain=plus)
    # both cones contain the vertical segment where u = y peaks
    assert wide["N_ratio"] == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(InputError):
        aperture_ratio(coordinate, flat, 1.0, 2.0, 0.0, X, 0.5)


def test_whitney_average_is_undefined_below_the_coverage_floor(flat, flat_whitney, coordinate):
    phi = WhitneyAverage(flat_whitney, coordinate)
    floor = flat_whitney.coverage_floor
    assert np.all(np.isfinite(phi(np.array([[0.1, floor], [-0.3, -floor]]))))
    with pytest.raises(FieldEvaluationError):
        phi(np.array([[0.1, 2.0 ** -(flat_whitney.depth + 2)]]))


def test_area_squared_integrates_to_the_carleson_sum(flat_grid, q0, rng):
    beta = {c: float(rng.uniform(0.0, 2.0)) for c in flat_grid.cubes}
    table = CubeDataTable.from_arrays(flat_grid, beta)
    profile = local_profile(table, q0)
    total = sum(beta[c.id] * c.measure for c in flat_grid.descendants(q0))
    assert np.sum(profile.sigma * profile.area_sq) == pytest.approx(total, rel=1e-12)
    centers = np.array([flat_grid[c].center for c in profile.leaves])
    assert area_dyadic(table, centers, q0) ** 2 == pytest.approx(profile.area_sq, rel=1e-12)


def test_fattened_ntmax_is_the_sup_over_the_fattened_regions(flat_structure, flat_table, flat_grid, q0):
    W = flat_structure.W
    profile = local_profile(flat_table, q0)
    x = np.array([flat_grid[c].center for c in profile.leaves])
    found = ntmax_dyadic(flat_table, x, q0)
    for point, value in zip(x, found):
        chain = [c.id for c in flat_grid.descendants(q0) if c.interval[0] <= point[0] < c.interval[1]]
        idx = np.concatenate([flat_structure.W_Q(c) for c in chain])
        lo, hi = dilate(W.lo[idx], W.hi[idx], 2.0 * flat_structure.tau)
        # |y| is largest at a corner of each box
        assert value == pytest.approx(float(np.max(np.abs(np.concatenate([lo[:, 1], hi[:, 1]])))), rel=1e-12)
    assert found == pytest.approx(profile.ntmax)


def test_poisson_area_level_sets_are_tiled_by_maximal_cubes(flat_structure, flat_grid, q0):
    P = catalog_field("poisson_interval", {"a": -0.5, "b": 0.5})
    table = cube_data(flat_structure, P.gradient_norm(), P, quadrature_level=0)
    profile = local_profile(table, q0)
    assert np.ptp(profile.area) > 0
    for alpha in np.quantile(profile.area, [0.25, 0.5, 0.75]):
        family = maximal_cubes(flat_grid, q0, values=dict(zip(profile.leaves, profile.area)), alpha=alpha)
        above = profile.area > alpha
        assert family.covered == pytest.approx(float(profile.sigma[above].sum()))
        for leaf, inside in zip(profile.leaves, above):
            owners = [c for c in family.cubes if flat_grid.is_descendant(leaf, c)]
            assert len(owners) == (1 if inside else 0)
