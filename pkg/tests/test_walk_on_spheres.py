import numpy as np
import pytest

from core.errors import InputError
from core.regions import DiskDomain, PolygonDomain
from core.walk_on_spheres import WosSolver, boundary_data, wos_evaluate, wos_field


def test_linear_data_on_the_disk():
    est = wos_evaluate(DiskDomain(), boundary_data("coordinate", {"axis": 0}), (0.3, 0.2), budget=4000, seed=11)
    assert est.samples + est.excluded == 4000
    assert abs(est.value - 0.3) <= 5 * est.stderr + 0.01


def test_constant_data_is_reproduced_exactly():
    est = wos_evaluate(DiskDomain((1.0, 1.0), 0.5), boundary_data("constant", {"c": 2.5}), (1.1, 0.9), budget=200)
    assert est.value == 2.5
    assert est.stderr == 0.0


def test_estimates_are_reproducible_and_order_free():
    solver = WosSolver(DiskDomain(), boundary_data("coordinate", {"axis": 1}), budget=500, seed=7)
    pts = np.array([[0.1, 0.2], [-0.4, 0.3]])
    forward = [e.value for e in solver.evaluate(pts)]
    backward = [e.value for e in solver.evaluate(pts[::-1])][::-1]
    assert forward == backward


def test_seed_changes_the_stream():
    g = boundary_data("coordinate", {"axis": 0})
    a = wos_evaluate(DiskDomain(), g, (0.2, 0.1), budget=300, seed=1)
    b = wos_evaluate(DiskDomain(), g, (0.2, 0.1), budget=300, seed=2)
    assert a.value != b.value


def test_square_domain_with_linear_data():
    square = PolygonDomain.from_vertices([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    est = wos_evaluate(square, boundary_data("coordinate", {"axis": 0}), (0.3, 0.6), budget=4000, seed=5)
    assert est.excluded == 0
    assert abs(est.value - 0.3) <= 5 * est.stderr + 0.01


def test_query_outside_the_domain_is_rejected():
    with pytest.raises(InputError):
        wos_evaluate(DiskDomain(), boundary_data("constant"), (2.0, 0.0), budget=10)


def test_budget_is_validated():
    with pytest.raises(InputError):
        WosSolver(DiskDomain(), boundary_data("constant"), budget=0)


def test_unknown_boundary_data():
    with pytest.raises(InputError):
        boundary_data("heaviside")


def test_solver_backed_field_of_constant_data():
    u = wos_field(WosSolver(DiskDomain(), boundary_data("constant", {"c": -1.0}), budget=50))
    X = np.array([[0.0, 0.0], [0.5, -0.2]])
    assert u.values(X) == pytest.approx([-1.0, -1.0])
    assert u.gradient(X) == pytest.approx(np.zeros((2, 2)))
    assert not u.check_domain(np.array([[3.0, 0.0]]))[0]
