from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lqtraj.errors import ArgumentError, UnsupportedStateError
from lqtraj.hilbert import DensityMatrix, FockSpace
from lqtraj.momentum import (
    GaussianMomentumState,
    LinearPotentialModel,
    averaged_momentum_moment,
    conditional_momentum_variance,
    momentum_stats,
    propagate_gaussian,
)
from lqtraj.oracle import StepSizeWarning, integrate_lse, integrate_master
from lqtraj.paths import sample_path, wy_functionals


def test_variance_law_example():
    assert conditional_momentum_variance(0.5, 0.25, 1.0) == pytest.approx(0.25, abs=1e-15)
    assert conditional_momentum_variance(0.5, 0.25, 0.0) == 0.5


def test_variance_law_rejects_bad_input():
    with pytest.raises(ArgumentError):
        conditional_momentum_variance(0.5, 0.0, 1.0)
    with pytest.raises(ArgumentError):
        conditional_momentum_variance(0.5, 0.25, -1.0)


def test_ground_state_normalized_and_centred():
    g = GaussianMomentumState.oscillator_ground(mean_p=0.7)
    assert g.log_norm_sq == pytest.approx(0.0, abs=1e-14)
    assert g.mean_p == pytest.approx(0.7)
    assert g.var_p == pytest.approx(0.5)
    total, _ = integrate.quad(lambda p: abs(g(p)) ** 2, -12, 12)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_non_normalizable_state_rejected():
    with pytest.raises(UnsupportedStateError):
        GaussianMomentumState(0.1 + 0j, 0j)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.05, max_value=2.0), st.floats(min_value=-1.0, max_value=1.0),
       st.floats(min_value=0.0, max_value=3.0))
def test_closed_form_variance_is_path_independent(k, F, t):
    model = LinearPotentialModel(force=F, k=k)
    g = GaussianMomentumState.oscillator_ground()
    for W, Y in ((0.0, 0.0), (1.3, -0.4)):
        out = propagate_gaussian(model, g, t, W, Y)
        assert out.var_p == pytest.approx(conditional_momentum_variance(g.var_p, k, t), rel=1e-12)


def test_closed_form_matches_sde():
    model = LinearPotentialModel(force=0.5, k=0.25)
    sp = FockSpace(80)
    path = sample_path(1.0, 10000, 4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StepSizeWarning)
        psi = integrate_lse(model.lse_model(sp), sp.basis(0), path)
    mean, var = momentum_stats(psi.normalized(), sp)
    W, Y = wy_functionals(path)
    g = propagate_gaussian(model, GaussianMomentumState.oscillator_ground(), 1.0, W, Y)
    assert var == pytest.approx(g.var_p, rel=1e-3)
    assert mean == pytest.approx(g.mean_p, abs=2e-3)
    assert psi.log_norm * 2 == pytest.approx(g.log_norm_sq, abs=5e-3)


def test_ensemble_moments_shift_with_force():
    model = LinearPotentialModel(force=0.5, k=0.25)
    sp = FockSpace(60)
    rho = integrate_master(model.master_model(sp), DensityMatrix.from_state(sp.basis(0)), 1.0, 4000)
    g = GaussianMomentumState.oscillator_ground()
    P = sp.P
    for n in (1, 2):
        op = np.linalg.matrix_power(P, n)
        assert np.trace(rho.matrix @ op).real == pytest.approx(averaged_momentum_moment(g, 0.5, 1.0, n), abs=1e-6)


def test_moment_order_range():
    g = GaussianMomentumState.oscillator_ground()
    assert averaged_momentum_moment(g, 0.0, 0.0, 4) == pytest.approx(3 * 0.25)
    with pytest.raises(ArgumentError):
        averaged_momentum_moment(g, 0.0, 0.0, 5)


def test_model_requires_positive_parameters():
    with pytest.raises(ArgumentError):
        LinearPotentialModel(k=0.0)
    with pytest.raises(ArgumentError):
        LinearPotentialModel().lse_model(FockSpace(10, hbar=2.0))


def test_translation_moves_mean():
    model = LinearPotentialModel(force=2.0, k=1e-9)
    g = propagate_gaussian(model, GaussianMomentumState.oscillator_ground(), 1.5, 0.0, 0.0)
    assert g.mean_p == pytest.approx(3.0, abs=1e-6)
    assert math.isfinite(g.mean_q)
