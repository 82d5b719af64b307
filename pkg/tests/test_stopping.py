import numpy as np
import pytest

from core.cube_data import CubeDataTable
from core.errors import HypothesisUnsatisfiable, InputError
from core.stopping import (aq_less_n_ratios, cascade_table, dyadic_alphas, good_lambda_scan, implication_checks,
                           jn_certify, jn_constant, maximal_cubes)


@pytest.fixture(scope="module")
def leaves(flat_grid, q0):
    return sorted(c.id for c in flat_grid.descendants(q0) if not c.children)


@pytest.fixture(scope="module")
def unit_sup(flat_grid):
    return CubeDataTable.from_arrays(flat_grid, {}, {q: 1.0 for q in flat_grid.cubes}, label="unit")


def test_jn_constant_for_half_and_square():
    assert jn_constant(0.5, 2.0) == pytest.approx(4.0 / np.log(2.0) ** 2)


def test_single_coefficient_certificate(flat_grid, q0):
    table = CubeDataTable.from_arrays(flat_grid, {q0: 1.0})
    cert = jn_certify(table, q0, alpha=0.5, p=2.0)
    assert cert.N == 1.0
    assert cert.witness == q0
    assert cert.moment == pytest.approx(1.0)
    assert cert.passed
    assert cert.to_dict()["passed"]


def test_hypothesis_above_the_cap(flat_grid, q0):
    table = CubeDataTable.from_arrays(flat_grid, {q0: 1.0})
    with pytest.raises(HypothesisUnsatisfiable) as info:
        jn_certify(table, q0, n_cap=0.5)
    assert isinstance(info.value, InputError)


def test_certificate_arguments_are_checked(flat_table, q0):
    with pytest.raises(InputError):
        jn_certify(flat_table, q0, alpha=1.0)
    with pytest.raises(InputError):
        jn_certify(flat_table, q0, t_points=1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cascade_ensemble_decays(flat_grid, q0, seed):
    cert = jn_certify(cascade_table(flat_grid, q0, seed=seed), q0)
    assert cert.xi[0] == 1.0
    assert cert.monotone
    assert cert.xi_ok
    assert cert.moment_ok


def test_cascade_weights_are_checked(flat_grid, q0):
    with pytest.raises(InputError):
        cascade_table(flat_grid, q0, low=1.0, high=0.5)


def test_level_set_everywhere_is_the_top_cube(flat_grid, q0, leaves):
    family = maximal_cubes(flat_grid, q0, values={c: 1.0 for c in leaves}, alpha=0.0)
    assert family.cubes == [q0]
    assert family.covered == pytest.approx(flat_grid[q0].measure)


def test_level_set_under_one_child(flat_grid, q0, leaves):
    first = flat_grid[q0].children[0]
    values = {c: float(flat_grid.is_descendant(c, first)) for c in leaves}
    assert maximal_cubes(flat_grid, q0, values=values, alpha=0.5).cubes == [first]
    dense = maximal_cubes(flat_grid, q0, values=values, alpha=0.5, beta=0.4)
    assert dense.cubes == [q0]
    assert dense.mode == "density"


def test_predicate_stops_at_a_generation(flat_grid, q0):
    family = maximal_cubes(flat_grid, q0, lambda c: c[0] == q0[0] + 2)
    assert len(family) == 4
    assert family.covered == pytest.approx(flat_grid[q0].measure)


def test_maximal_cubes_need_values_on_every_leaf(flat_grid, q0, leaves):
    with pytest.raises(InputError):
        maximal_cubes(flat_grid, q0, values={leaves[0]: 1.0})
    with pytest.raises(InputError):
        maximal_cubes(flat_grid, q0)


def test_dyadic_alphas_span_the_range():
    assert dyadic_alphas(np.array([0.0, 0.3, 5.0])).tolist() == [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
    assert len(dyadic_alphas(np.zeros(3))) == 0


def test_good_lambda_with_vanishing_area(flat_grid, q0, unit_sup):
    zero = CubeDataTable.from_arrays(flat_grid, {})
    report = good_lambda_scan(zero, unit_sup, [0.5], [0.25, 0.5], q0)
    assert report.degenerate
    assert report.violations == 0


def test_good_lambda_rows_are_subsets(flat_grid, q0, unit_sup):
    report = good_lambda_scan(cascade_table(flat_grid, q0, seed=4), unit_sup, [0.25, 1.0], [0.125, 0.5, 2.0], q0)
    assert not report.degenerate
    assert len(report.rows) == 2 * 3 * len(report.alphas)
    assert all(row["lhs"] <= row["rhs"] for row in report.rows)
    assert set(report.to_dict()["fits"]) == {"0.25", "1.0"}


def test_good_lambda_convention_is_checked(flat_grid, q0, unit_sup):
    with pytest.raises(InputError):
        good_lambda_scan(unit_sup, unit_sup, [0.5], [0.5], q0, convention="weighted")


def test_ratios_vanish_for_a_zero_area(flat_grid, unit_sup):
    zero = CubeDataTable.from_arrays(flat_grid, {})
    out = aq_less_n_ratios(zero, unit_sup, [2.0, 4.0])
    assert out["summary"][2.0]["sup"] == 0.0
    assert out["cubes"] == len(flat_grid)


def test_implication_chain_on_a_cascade(flat_grid, q0, unit_sup):
    out = implication_checks(cascade_table(flat_grid, q0, seed=9), unit_sup, qs=[2.0, 4.0])
    assert out["passed"]
    assert out["b_implies_a_violations"] == 0
    assert np.isfinite(out["a_loc_proxy"])


def test_good_lambda_exponent_is_positive_when_the_sup_spreads(flat_grid, q0, leaves):
    # A = 10 on every leaf, N^ doubles from leaf to leaf
    G = CubeDataTable.from_arrays(flat_grid, {c: 100.0 for c in leaves})
    H = CubeDataTable.from_arrays(flat_grid, {}, {c: 2.0 ** i for i, c in enumerate(leaves)})
    report = good_lambda_scan(G, H, [0.1], [0.125, 0.25, 0.5], q0)
    assert report.alphas == [8.0, 16.0]
    worst = {row["gamma"]: row["lhs"] / row["rhs"] for row in report.rows if row["alpha"] == 8.0}
    assert worst == pytest.approx({0.125: 0.125, 0.25: 0.25, 0.5: 0.375})
    assert report.theta > 0
