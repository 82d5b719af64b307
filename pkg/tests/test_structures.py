import numpy as np
import pytest

from config.experiment_config import StructureParams, build_config
from core.corona import build_corona
from core.dyadic_grid import build_grid
from core.errors import InputError
from core.experiment_orchestrator import ExperimentOrchestrator
from core.structures import (build_structure, carleson_box, check_containments, cone_embedding_check,
                             cone, delta_generation, discrete_sawtooth, in_base_family, regime_domains, sawtooth,
                             whitney_region)
from core.whitney import TAU_0, Window, decompose, nearest_dyadic
from tests.conftest import FLAT_K_MAX


def test_base_family_is_nonempty_for_every_cube(flat_structure):
    assert flat_structure.check_base_nonempty() == []


def test_base_members_satisfy_the_size_and_distance_bounds(flat_structure):
    S = flat_structure
    for qid in S.cube_ids[::5]:
        for i in S.W0_Q(qid)[::7]:
            assert in_base_family(S.grid, qid, S.W.lo[i], S.W.hi[i], S.eta, S.K)


def test_measured_constants(flat_structure):
    C, m0, C0 = flat_structure.measure_constants()
    assert C >= 1.0
    assert m0 >= 2
    assert np.isfinite(C0)


def test_carleson_box_fits_in_the_enlarged_ball(flat_structure, q0):
    audit = check_containments(flat_structure, q0, samples=500)
    assert audit["T_in_Bstar"]
    assert audit["T_tau_in_T_tau0"]
    assert any(audit[f"BQ_in_T_tau/{n}"] for n in (1, 2, 4))


def test_traditional_cone_embeds_in_the_dyadic_cone(flat_structure, flat_grid, q0):
    report = cone_embedding_check(flat_structure, flat_grid[q0].center, 500)
    assert report["admissible"] > 0
    assert report["failures"] == 0


def test_cad_members_stay_on_the_plus_side(flat_grid, flat_whitney):
    S = build_structure(flat_grid, flat_whitney, "cad", StructureParams())
    assert S.side == "plus"
    for qid in S.cube_ids:
        idx = S.W_Q(qid)
        assert len(idx) > 0
        assert np.all(flat_whitney.center[idx][:, 1] > 0)
    assert whitney_region(S, S.cube_ids[0]).is_connected()


def test_cad_mode_needs_a_two_sided_set(four_corners):
    grid = build_grid(four_corners, 0, 2)
    W = decompose(four_corners, Window((-1.0, -1.0), (2.0, 2.0)), 5)
    with pytest.raises(InputError):
        build_structure(grid, W, "cad")


def test_ur_mode_needs_a_corona(flat_grid, flat_whitney):
    with pytest.raises(InputError):
        build_structure(flat_grid, flat_whitney, "ur")


def test_carleson_box_contains_its_whitney_regions(flat_structure, flat_grid, q0):
    T = carleson_box(flat_structure, q0)
    for child in flat_grid[q0].children:
        idx = flat_structure.W_Q(child)
        assert np.all(T.contains(flat_structure.W.center[idx]))


def test_sawtooth_removes_the_stopping_cubes(flat_structure, flat_grid, q0):
    kids = flat_grid[q0].children
    family = discrete_sawtooth(flat_structure, kids[:1], q0)
    assert q0 in family
    assert kids[0] not in family
    assert kids[1] in family
    region, _ = sawtooth(flat_structure, kids[:1], q0)
    assert not region.is_empty()


def test_sawtooth_family_must_be_disjoint(flat_structure, flat_grid, q0):
    kid = flat_grid[q0].children[0]
    grandkid = flat_grid[kid].children[0]
    with pytest.raises(InputError):
        discrete_sawtooth(flat_structure, [kid, grandkid], q0)


def test_delta_generation_brackets_the_radius():
    for r in (1e-3, 2.0 ** -12, 0.004):
        k = delta_generation(r)
        assert 2.0 ** (-k - 1) < 200 * r <= 2.0 ** (-k)


def test_dyadic_cone_contains_the_regions_of_its_cubes(flat_structure, flat_grid):
    leaf = flat_grid.generation(FLAT_K_MAX)[3]
    x = flat_grid[leaf].center
    region = cone(flat_structure, x)
    for qid in flat_grid.ancestors(leaf):
        assert np.all(region.contains(flat_structure.W.center[flat_structure.W_Q(qid)]))


def test_nearest_dyadic_cube_has_the_same_side(flat_whitney, flat_grid):
    W = flat_whitney
    inside = np.flatnonzero((W.k >= 0) & (W.k <= FLAT_K_MAX) & (np.abs(W.center[:, 0]) < 0.5))
    for i in inside[::11]:
        q = nearest_dyadic(W, int(i), flat_grid)
        assert q.k == W.k[i]
        assert abs(q.center[0] - W.center[i, 0]) <= q.length
    with pytest.raises(InputError):
        nearest_dyadic(W, int(np.flatnonzero(W.k > FLAT_K_MAX)[0]), flat_grid)


def test_regime_domains_lie_on_opposite_sides(flat, flat_grid, flat_whitney, flat_structure):
    corona = build_corona(flat, flat_grid)
    S = build_structure(flat_grid, flat_whitney, "ur", StructureParams(), corona=corona)
    plus, minus = regime_domains(S, corona.regimes[0])
    up = np.sign(S.W.center[plus.cube_ids, 1])
    down = np.sign(S.W.center[minus.cube_ids, 1])
    assert len(up) and len(down)
    assert len(set(up)) == 1 and set(down) == {-up[0]}
    with pytest.raises(InputError):
        regime_domains(flat_structure, corona.regimes[0])


def test_carleson_box_corners_lie_in_the_widest_box(flat_structure, flat_grid, q0):
    for qid in [q0] + [c.id for c in flat_grid.children(q0)]:
        T = carleson_box(flat_structure, qid)
        T0 = carleson_box(flat_structure, qid, tau=TAU_0)
        corners = np.vstack([T.lo, T.hi, np.column_stack([T.lo[:, 0], T.hi[:, 1]]),
                             np.column_stack([T.hi[:, 0], T.lo[:, 1]])])
        assert np.all(T0.contains(corners))
        assert check_containments(flat_structure, qid, samples=200)["T_tau_in_T_tau0"]


@pytest.mark.parametrize("name", ["flat", "graph(0.25)", "corner_graph", "polygon(square)", "polygon(triangle)",
                                  "four_corners(2)"])
def test_every_scenario_has_base_whitney_cubes(name, tmp_path):
    orchestrator = ExperimentOrchestrator(build_config({"scenario": name, "depth": 2, "out": str(tmp_path)}))
    p = orchestrator.build_pipeline()
    assert p.structure.check_base_nonempty() == []
