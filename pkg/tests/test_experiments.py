import numpy as np
import pytest

from config.experiment_config import StructureParams
from core.big_pieces import big_pieces_subdomain
from core.corona import build_corona
from core.errors import InputError
from core.experiments import (corona_cme_sum, kp_restriction_check, lipschitz_catalog, n_less_s_global,
                              n_less_s_local, stability, transfer_cme)
from core.fields import constant_field, zero_field
from core.regions import ComplementDomain, PolygonDomain
from core.structures import build_structure


@pytest.fixture(scope="module")
def flat_corona(flat, flat_grid):
    return build_corona(flat, flat_grid)


@pytest.fixture(scope="module")
def cad_structure(flat_grid, flat_whitney):
    return build_structure(flat_grid, flat_whitney, "cad", StructureParams())


def test_stability_band():
    assert stability(1.0, 1.05, 0.1)["stable"]
    assert not stability(1.0, 2.0, 0.1)["stable"]
    assert stability(0.0, 0.0, 0.1)["change"] == 0.0
    assert not stability(float("nan"), 1.0, 0.1)["stable"]


def test_local_n_less_s_needs_q_above_two(flat_structure, q0):
    with pytest.raises(InputError):
        n_less_s_local(flat_structure, constant_field(1.0), q0, q=2.0)


def test_local_n_less_s_of_a_constant(flat_structure, q0):
    out = n_less_s_local(flat_structure, constant_field(3.0), q0, q=4.0, quadrature_level=0)
    assert out["ratio"] == 0.0
    assert not out["violation"]
    assert out["good_lambda_ratio"] == 0.0


def test_global_n_less_s_of_the_height(flat, coordinate):
    X = np.array([[0.0, 0.0], [0.25, 0.0]])
    out = n_less_s_global(coordinate, flat, 1.0, 0.5, X, q=4.0, domain=ComplementDomain(flat, "plus"))
    assert out["ratio"] == pytest.approx(np.sqrt(3.0 / np.pi), rel=1e-6)
    assert out["samples"] == 2


def test_flat_big_piece_is_the_whole_cube(flat_grid, q0):
    piece = big_pieces_subdomain(flat_grid, q0)
    assert piece.theta == pytest.approx(1.0)
    assert piece.M == pytest.approx(0.0, abs=1e-12)
    center = flat_grid[q0].center
    assert piece.contains(np.array([center + [0.0, 0.1]]))[0]


def test_lipschitz_catalog_on_the_plus_side(cad_structure):
    catalog = lipschitz_catalog(cad_structure)
    labels = [label for label, _ in catalog]
    assert any(label.startswith("big_pieces") for label in labels)
    assert any(label.startswith("sawtooth") for label in labels)


def test_cad_transference_of_the_unit_field(cad_structure, flat_grid, q0):
    catalog = lipschitz_catalog(cad_structure, cubes=[q0])
    out = transfer_cme(constant_field(1.0), cad_structure, "cad", catalog=catalog, levels=2, centers=3,
                       n_r=8, n_theta=16)
    assert out["lhs"] > 0
    assert np.isfinite(out["ratio"])
    assert len(out["catalog"]) == len(catalog)


def test_transference_needs_a_catalog(cad_structure):
    with pytest.raises(InputError):
        transfer_cme(constant_field(1.0), cad_structure, "cad", catalog=[], levels=1, centers=1, n_r=4, n_theta=8)


def test_ur_transference_needs_a_ur_structure(flat_structure):
    with pytest.raises(InputError):
        transfer_cme(constant_field(1.0), flat_structure, "ur", levels=1, centers=1, n_r=4, n_theta=8)
    with pytest.raises(InputError):
        transfer_cme(constant_field(1.0), flat_structure, "mixed")


def test_flat_corona_has_no_bad_cubes(flat_corona, flat_grid):
    assert flat_corona.bad == set()
    assert flat_corona.check_coherence()
    assert flat_corona.check_bilateral()
    assert len(flat_corona.regimes) == len(flat_grid.roots)


def test_corona_sum_on_the_flat_line(flat_table, flat_corona):
    out = corona_cme_sum(flat_table, flat_corona)
    assert out["sigma1"] == 0.0
    expected = sum(flat_table.sigma(q) * flat_table.beta_of(q) for q in flat_table.cube_ids)
    assert out["total"] == pytest.approx(expected)


def test_kp_restriction_with_a_vanishing_gradient(flat):
    D = PolygonDomain.from_vertices([(-1.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0)])
    X = np.array([[0.0, 0.5], [0.5, 0.25]])
    out = kp_restriction_check(zero_field(), flat, D, X, levels=2, centers=4, n_r=8, n_theta=16)
    assert out["holds"]
    assert out["C"] == pytest.approx(np.pi)
    assert out["sup_term"] == 0.0


def test_kp_restriction_needs_samples(flat):
    D = PolygonDomain.from_vertices([(-1.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0)])
    with pytest.raises(InputError):
        kp_restriction_check(zero_field(), flat, D, np.zeros((0, 2)))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_flat_big_pieces_on_both_sides_of_the_origin(flat_grid, k):
    for qid in flat_grid.generation(k):
        q = flat_grid[qid]
        piece = big_pieces_subdomain(flat_grid, qid)
        assert piece.theta == pytest.approx(1.0)
        assert piece.M == pytest.approx(0.0, abs=1e-12)
        bottom = piece.vertices[:-2]
        assert np.all(np.diff(bottom[:, 0]) > 0)
        assert (bottom[0, 0], bottom[-1, 0]) == pytest.approx(q.interval)
        assert piece.contains(np.array([q.center + [0.0, 0.25 * q.length]]))[0]
