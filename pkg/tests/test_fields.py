import numpy as np
import pytest

from core.errors import FieldEvaluationError, InputError
from core.fields import (catalog_field, check_interior, check_local_caccioppoli, constant_field, disk_nodes,
                         harmonic_residual)


def test_poisson_interval_is_one_half_above_the_midpoint():
    u = catalog_field("poisson_interval")
    assert u.values(np.array([[0.0, 1.0]]))[0] == pytest.approx(0.5)


def test_poisson_interval_gradient_matches_finite_differences():
    u = catalog_field("poisson_interval", {"a": -1.0, "b": 1.0})
    X = np.array([[0.3, 0.7]])
    h = 1e-6
    fd = [(u.values(X + e) - u.values(X - e))[0] / (2 * h) for e in (np.array([h, 0.0]), np.array([0.0, h]))]
    assert u.gradient(X)[0] == pytest.approx(fd, rel=1e-5)


def test_power_fields_satisfy_cauchy_riemann():
    re, im = catalog_field("re_power", {"k": 3}), catalog_field("im_power", {"k": 3})
    X = np.array([[0.4, -0.2], [1.1, 0.5]])
    gr, gi = re.gradient(X), im.gradient(X)
    assert gr[:, 0] == pytest.approx(gi[:, 1])
    assert gr[:, 1] == pytest.approx(-gi[:, 0])


@pytest.mark.parametrize("name", ["coordinate", "re_power", "im_power", "log_potential"])
def test_catalog_fields_are_harmonic(name):
    u = catalog_field(name)
    X = np.array([[0.3, 0.4], [-0.6, 1.2]])
    assert np.all(harmonic_residual(u, X) < 1e-3)


def test_unknown_field_is_rejected():
    with pytest.raises(InputError):
        catalog_field("biharmonic")


def test_non_finite_values_raise_with_the_location_tag():
    u = catalog_field("log_potential", {"center": (0.0, 0.0)})
    with pytest.raises(FieldEvaluationError) as info:
        u.values(np.array([[0.0, 0.0]]), where="probe")
    assert info.value.details["where"] == "probe"


def test_gradient_norm_of_the_coordinate_field(coordinate):
    g = coordinate.gradient_norm()
    assert g.values(np.array([[0.2, 3.0], [-5.0, 0.1]])) == pytest.approx([1.0, 1.0])


def test_disk_nodes_integrate_area():
    _, w = disk_nodes((1.0, -2.0), 0.75, 12, 24)
    assert w.sum() == pytest.approx(np.pi * 0.75 ** 2)


def test_caccioppoli_constant_is_finite_for_a_harmonic_field():
    u = catalog_field("re_power", {"k": 2})
    C = check_interior(u, (1.0, 1.0), (1.5, 1.5), "caccioppoli")
    assert 0 < C < np.inf


def test_oscillation_of_a_constant_is_zero():
    assert check_interior(constant_field(2.0), (0.0, 1.0), (1.0, 2.0), "oscillation") == 0.0


def test_interior_checks_refuse_boxes_meeting_the_set(flat, coordinate):
    with pytest.raises(InputError):
        check_interior(coordinate, (0.0, 0.1), (0.2, 0.3), "moser", set_=flat)


def test_local_caccioppoli_for_the_coordinate_field(flat, coordinate):
    ratio = check_local_caccioppoli(coordinate.gradient_norm(), coordinate, flat, (0.0, 1.0))
    assert 0 < ratio < 1


def test_doubled_box_touching_the_set_up_to_rounding_is_refused(flat, coordinate):
    # each doubled box reaches down to y = 0 up to rounding
    for lo_y in (0.1, 0.3, 0.7):
        with pytest.raises(InputError):
            check_interior(coordinate, (0.0, lo_y), (0.2 * lo_y / 0.1, 3.0 * lo_y), "moser", set_=flat)
    assert check_interior(coordinate, (0.0, 0.5), (0.2, 0.7), "moser", set_=flat) > 0
