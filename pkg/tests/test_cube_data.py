import numpy as np
import pytest

from core.cube_data import CubeDataTable
from core.errors import InputError
from core.estimators import cme_dyadic, dyadic_carleson_ratios, local_profile
from tests.conftest import FLAT_K_MAX


def test_table_is_monotone_and_nonnegative(flat_table, flat_structure):
    assert len(flat_table) == len(flat_structure.cube_ids)
    assert flat_table.check_monotone()
    assert np.all(flat_table.beta > 0)
    assert np.all(flat_table.m > 0)
    assert flat_table.node_count > 0


def test_records_carry_every_column(flat_table):
    row = flat_table.records()[0]
    assert set(row) == {"k", "j", "beta", "beta_hat", "m", "m_hat"}


def test_unit_coefficients_count_generations(flat_grid):
    table = CubeDataTable.from_arrays(flat_grid, {q: 1.0 for q in flat_grid.cubes})
    ratios = dyadic_carleson_ratios(table)
    for qid, value in zip(table.cube_ids, ratios):
        assert value == pytest.approx(FLAT_K_MAX - qid[0] + 1)
    assert cme_dyadic(table).value == pytest.approx(FLAT_K_MAX + 1)


def test_area_profile_integrates_the_coefficients(flat_table, flat_grid, q0):
    profile = local_profile(flat_table, q0)
    below = [q for q in flat_table.cube_ids if flat_grid.is_descendant(q, q0) or q == q0]
    expected = sum(flat_table.sigma(q) * flat_table.beta_of(q) for q in below)
    assert profile.norm(profile.area, 2.0) ** 2 == pytest.approx(expected)
    assert profile.measure == pytest.approx(flat_grid[q0].measure)


def test_negative_coefficients_are_rejected(flat_grid, q0):
    with pytest.raises(InputError):
        CubeDataTable.from_arrays(flat_grid, {q0: -1.0})


def test_unknown_cube_lookup(flat_table):
    with pytest.raises(InputError):
        flat_table.beta_of((99, 0))
