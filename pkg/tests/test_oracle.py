from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from lqtraj.errors import ArgumentError, InvalidDimensionError, NumericalError
from lqtraj.hilbert import DensityMatrix, FockSpace, StateVector, coherent_state, fidelity
from lqtraj.oracle import (
    LseModel,
    MasterModel,
    SplitStepper,
    StepSizeWarning,
    ensemble_estimate,
    integrate_lse,
    integrate_lse_batch,
    integrate_master,
    master_steps_for,
    norm_weights,
    sample_guided,
)
from lqtraj.paths import refine_path, sample_increments, sample_path
from lqtraj.qnd import QndModel
from lqtraj.quadratic import HOPositionModel


def test_split_drift_round_trip():
    sp = FockSpace(6)
    m = LseModel.from_split(-sp.number, 0.5 * sp.Q, sp)
    assert np.allclose(m.A, -sp.number)


def test_shape_mismatch():
    with pytest.raises(InvalidDimensionError):
        LseModel(np.eye(3), np.eye(4))


def test_from_master_matches_unravelling():
    sp = FockSpace(5)
    mm = MasterModel(sp.number.copy(), (0.3 * sp.a,), 1.0, sp)
    lse = LseModel.from_master(mm)
    assert np.allclose(lse.B, math.sqrt(2) * 0.3 * sp.a)
    assert np.allclose(lse.A_tilde, -1j * sp.number - 0.09 * sp.adag @ sp.a)


def test_diagonal_model_step_is_exact_for_any_dt():
    sp = FockSpace(20)
    qnd = QndModel(1.0)
    model = qnd.lse_model(sp)
    psi0 = coherent_state(1.5, sp)
    coarse = sample_path(1.0, 1, 3)
    fine = sample_path(1.0, 1, 3)
    for _ in range(5):
        fine = refine_path(fine)
    a, b = integrate_lse(model, psi0, coarse), integrate_lse(model, psi0, fine)
    assert fidelity(a, b) == pytest.approx(1.0, abs=1e-12)
    assert a.log_norm == pytest.approx(b.log_norm, abs=1e-10)


def test_refinement_converges_for_noncommuting_model():
    hom = HOPositionModel.from_ratio(1.0)
    sp = hom.space(40)
    model = hom.quadratic_model().lse_model(sp)
    psi0 = coherent_state(0.5, sp)
    path = sample_path(0.5, 250, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StepSizeWarning)
        states = [integrate_lse(model, psi0, path)]
        for _ in range(3):
            path = refine_path(path)
            states.append(integrate_lse(model, psi0, path))
    errs = [1 - fidelity(states[i], states[-1]) for i in range(3)]
    assert max(errs) < 1e-6


def test_large_norms_do_not_overflow():
    sp = FockSpace(30)
    model = QndModel(1.0).lse_model(sp)
    inc = np.full((1, 4), 40.0)
    (st,) = integrate_lse_batch(model, coherent_state(2.0, sp), inc, 0.1)
    assert math.isfinite(st.log_norm) and st.log_norm > 300


def test_step_size_warning_only_for_noncommuting():
    sp = FockSpace(20)
    with pytest.warns(StepSizeWarning):
        SplitStepper(LseModel.from_split(-1j * sp.P @ sp.P, sp.Q, sp), 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SplitStepper(QndModel(1.0).lse_model(sp), 0.5)
    with pytest.raises(ArgumentError):
        SplitStepper(QndModel(1.0).lse_model(sp), 0.0)


def test_wiener_norms_are_a_martingale():
    sp = FockSpace(40)
    model = QndModel(1.0).lse_model(sp)
    psi0 = coherent_state(1.0, sp)
    inc = sample_increments(0.1, 10, 21, range(4000))
    w = norm_weights(integrate_lse_batch(model, psi0, inc, 0.01))
    assert abs(w.mean() - 1.0) < 3 * w.std() / math.sqrt(len(w))


def test_mixture_proposal_has_unit_weights():
    sp = FockSpace(40)
    model = QndModel(1.0).lse_model(sp)
    ens = sample_guided(model, coherent_state(2.0, sp), 2.0, 3, seed=4, indices=range(50))
    log_w = np.array([2 * s.log_norm for s in ens.states]) + ens.log_weights
    assert np.abs(log_w).max() < 1e-12


def test_drift_proposal_weights_average_to_one():
    sp = FockSpace(30)
    model = QndModel(0.5).lse_model(sp)
    ens = sample_guided(model, coherent_state(1.0, sp), 0.5, 50, seed=9, indices=range(2000), proposal="drift")
    w = np.array([math.exp(2 * s.log_norm) for s in ens.states]) * np.exp(ens.log_weights)
    assert abs(w.mean() - 1.0) < 3 * w.std() / math.sqrt(len(w))
    with pytest.raises(ArgumentError):
        sample_guided(model, coherent_state(1.0, sp), 0.5, 5, 0, [0], proposal="nope")


def test_master_preserves_trace_and_positivity():
    sp = FockSpace(30)
    mm = QndModel(0.5, omega=1.0).master_model(sp)
    rho = integrate_master(mm, DensityMatrix.from_state(coherent_state(1.0, sp)), 1.0, master_steps_for(mm, 1.0))
    assert rho.trace == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.eigvalsh(rho.matrix).min() > -1e-8


def test_master_instability_is_reported():
    sp = FockSpace(30)
    mm = QndModel(5.0).master_model(sp)
    with pytest.raises(NumericalError):
        integrate_master(mm, DensityMatrix.from_state(coherent_state(3.0, sp)), 1.0, 2)


def test_lse_moments_agree_with_master():
    # QND with a coherent input: <n> and <n^2> are conserved on average
    sp = FockSpace(30)
    qnd = QndModel(1.0)
    psi0 = coherent_state(1.5, sp)
    ens = sample_guided(qnd.lse_model(sp), psi0, 0.5, 5, seed=2, indices=range(10000))
    n = sp.number
    rho = integrate_master(qnd.master_model(sp), DensityMatrix.from_state(psi0), 0.5, 400)
    for op in (n, n @ n):
        est = ensemble_estimate(ens.states, op, log_weights=ens.log_weights)
        exact = np.trace(rho.matrix @ op).real
        assert abs(est.mean.real - exact) <= 3 * est.stderr + 1e-9


def test_ensemble_estimate_validation():
    sp = FockSpace(4)
    states = [sp.basis(0)]
    with pytest.raises(ArgumentError):
        ensemble_estimate([], sp.number)
    with pytest.raises(ArgumentError):
        ensemble_estimate(states)
    est = ensemble_estimate(states, sp.number)
    assert math.isnan(est.stderr)


def test_dimension_check_in_integrate():
    sp = FockSpace(6)
    model = QndModel(1.0).lse_model(FockSpace(8))
    with pytest.raises(InvalidDimensionError):
        integrate_lse(model, StateVector(np.ones(6), sp), sample_path(1.0, 4, 0))
