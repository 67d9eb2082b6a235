from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from lqtraj.errors import ArgumentError
from lqtraj.paths import (
    covariance_WY,
    double_ito_Z,
    double_ito_Z_batch,
    ito_integral,
    ito_sums_batch,
    joint_density_WY,
    refine_path,
    sample_increments,
    sample_path,
    wy_functionals,
    xi_covariance,
)


def test_same_seed_same_path():
    a = sample_path(1.0, 100, seed=7, index=3)
    b = sample_path(1.0, 100, seed=7, index=3)
    c = sample_path(1.0, 100, seed=7, index=4)
    assert np.array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments, c.increments)


def test_batch_rows_match_single_paths():
    inc = sample_increments(2.0, 50, 11, [0, 5, 9])
    assert np.array_equal(inc[1], sample_path(2.0, 50, 11, 5).increments)


def test_refinement_keeps_coarse_endpoints():
    p = sample_path(1.0, 64, 3)
    f = refine_path(p)
    assert f.steps == 128 and f.dt == pytest.approx(p.dt / 2)
    coarse = np.cumsum(p.increments)
    fine = np.cumsum(f.increments)[1::2]
    assert np.allclose(coarse, fine, atol=1e-13)


def test_refined_increments_have_right_variance():
    inc = np.concatenate([refine_path(sample_path(1.0, 100, 1, i)).increments for i in range(200)])
    assert np.var(inc) == pytest.approx(1.0 / 200, rel=0.05)


@pytest.mark.parametrize("t,steps", [(0.0, 10), (-1.0, 10), (1.0, 0), (1.0, 2.5)])
def test_bad_grid(t, steps):
    with pytest.raises(ArgumentError):
        sample_path(t, steps, 0)


def test_ito_integral_of_constant_is_W():
    p = sample_path(1.0, 100, 2)
    assert ito_integral(p, lambda t: 2.0) == pytest.approx(2.0 * p.W)


def test_y_is_left_endpoint_sum():
    p = sample_path(1.0, 10, 4)
    _, Y = wy_functionals(p)
    assert Y == pytest.approx(sum(i * p.dt * d for i, d in enumerate(p.increments)))


def test_batch_sums_match_single():
    inc = sample_increments(1.0, 40, 8, range(3))
    f1 = lambda t: np.cos(t)  # noqa: E731
    f2 = lambda t: 1.0 + t  # noqa: E731
    x = ito_sums_batch(inc, 0.025, f1)
    z = double_ito_Z_batch(inc, 0.025, f1, f2)
    p = sample_path(1.0, 40, 8, 2)
    assert x[2] == pytest.approx(ito_integral(p, f1))
    assert z[2] == pytest.approx(double_ito_Z(p, f1, f2))


def test_z_vanishes_for_proportional_coefficients():
    p = sample_path(1.0, 50, 5)
    assert abs(double_ito_Z(p, lambda t: 3.0, lambda t: 3.0)) < 1e-14


def test_joint_density_normalized_and_matches_covariance():
    t = 1.3
    total, _ = integrate.dblquad(lambda y, w: joint_density_WY(w, y, t), -12, 12, -12, 12, epsabs=1e-11)
    assert total == pytest.approx(1.0, abs=1e-6)
    cov = covariance_WY(t)
    inv = np.linalg.inv(cov)
    w, y = 0.4, -0.2
    expected = np.exp(-0.5 * np.array([w, y]) @ inv @ np.array([w, y])) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))
    assert joint_density_WY(w, y, t) == pytest.approx(expected, rel=1e-12)


def test_xi_covariance_values():
    assert xi_covariance(lambda t: t, lambda t: 1.0, 1.0) == pytest.approx(0.5)
    assert xi_covariance(lambda t: t, lambda t: t, 2.0, tau=1.0) == pytest.approx(1 / 3)
