import numpy as np
import pytest

from core.dyadic_grid import BoundarySamples
from core.errors import InputError
from core.riesz import (probe_samples, riesz_kernel, riesz_probe, sample_spacing, smoothstep_cutoff,
                        truncated_transform)

SPACING = 2.0 ** -7


def test_smoothstep_cutoff_profile():
    t = np.array([0.0, 1.0, 1.5, 2.0, 5.0])
    assert smoothstep_cutoff(t) == pytest.approx([0.0, 0.0, 0.5, 1.0, 1.0])


def test_kernel_is_odd_and_vanishes_at_the_origin():
    z = np.array([[0.3, -0.4], [0.0, 0.0]])
    k = riesz_kernel(z)
    assert k[0] == pytest.approx(-riesz_kernel(-z[:1])[0])
    assert k[0] == pytest.approx(z[0] / 0.25 / np.pi)
    assert np.all(k[1] == 0.0)


def test_symmetric_samples_cancel_at_the_center():
    samples = BoundarySamples(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([1.0, 1.0]), [])
    out = truncated_transform(np.zeros((1, 2)), samples, np.ones(2), 0.25)
    assert out[0] == pytest.approx([0.0, 0.0], abs=1e-15)


def test_flat_probe_samples(flat):
    samples = probe_samples(flat, SPACING)
    assert len(samples) == 256
    assert sample_spacing(samples) == pytest.approx(SPACING)


def test_flat_norm_estimates_stay_bounded(flat):
    samples = probe_samples(flat, SPACING)
    report = riesz_probe(flat, samples, [0.25, 0.125, 0.0625], ensemble=4, iterations=10, seed=3)
    assert len(report.norms) == 3
    assert 0 < report.sup <= 1.5
    assert report.witness_eps in report.eps


def test_supplied_density_gets_its_own_quotient(flat):
    samples = probe_samples(flat, SPACING)
    f = np.sign(samples.points[:, 0])
    report = riesz_probe(flat, samples, [0.125], f=f, ensemble=2, iterations=5)
    assert len(report.supplied) == 1
    assert report.supplied[0] <= report.norms[0] + 1e-12


def test_truncation_below_the_spacing_is_rejected(flat):
    samples = probe_samples(flat, SPACING)
    with pytest.raises(InputError):
        riesz_probe(flat, samples, [SPACING / 2], ensemble=1, iterations=1)
    with pytest.raises(InputError):
        probe_samples(flat, 0.0)


def test_four_corners_probe_uses_square_centers(four_corners):
    samples = probe_samples(four_corners, 0.1)
    assert len(samples) == 64
    assert samples.weights.sum() == pytest.approx(1.0)
