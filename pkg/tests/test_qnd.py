from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lqtraj.errors import ArgumentError, DegenerateStateError, InvalidStateError
from lqtraj.hilbert import DensityMatrix, FockSpace, coherent_state, thermal_state
from lqtraj.oracle import integrate_lse
from lqtraj.paths import sample_path
from lqtraj.qnd import (
    QndModel,
    average_conditional_uncertainty,
    conditional_number_stats,
    measure_normalization,
    posterior_state,
    qnd_weights,
)


@pytest.fixture(scope="module")
def states():
    sp = FockSpace(128)
    thermal = thermal_state(4.0, sp).diagonal
    coherent = np.abs(coherent_state(math.sqrt(20.0), sp).amplitudes) ** 2
    return thermal, coherent / coherent.sum()


def test_weights_formula():
    w = qnd_weights(0.5, 2.0, 0.3, 6)
    n = np.arange(6)
    expected = -4 * 0.5 * 2.0 * n**2 + 2 * math.sqrt(1.0) * n * 0.3
    assert np.allclose(w.log_V, expected)
    assert w.V.max() == 1.0


def test_weights_underflow_gracefully():
    w = qnd_weights(1.0, 100.0, 0.0, 50)
    assert w.V[0] == 1.0 and w.V[-1] == 0.0


@pytest.mark.parametrize("kwargs", [dict(k=0, t=1, W=0, nmax=3), dict(k=1, t=-1, W=0, nmax=3), dict(k=1, t=1, W=0, nmax=0)])
def test_weights_argument_checks(kwargs):
    with pytest.raises(ArgumentError):
        qnd_weights(**kwargs)


def test_conditional_stats_of_number_state():
    p = np.zeros(10)
    p[3] = 1.0
    mean, var = conditional_number_stats(p, qnd_weights(1.0, 0.5, 1.1, 10))
    assert mean == pytest.approx(3.0, abs=1e-12) and var == pytest.approx(0.0, abs=1e-12)


def test_conditional_stats_errors():
    with pytest.raises(InvalidStateError):
        conditional_number_stats([0.5, 0.4], qnd_weights(1.0, 0.1, 0.0, 2))
    with pytest.raises(ArgumentError):
        conditional_number_stats([0.5, 0.5], qnd_weights(1.0, 0.1, 0.0, 3))
    p = np.zeros(60)
    p[-1] = 1.0
    with pytest.raises(DegenerateStateError):
        conditional_number_stats(p, qnd_weights(1.0, 1000.0, 0.0, 60))


def test_initial_uncertainty(states):
    for p in states:
        assert average_conditional_uncertainty(p, 0.0) == pytest.approx(math.sqrt(20.0), abs=1e-9)


def test_curves_decrease_and_collapse(states):
    taus = [0.01, 0.1, 0.5, 1.0, 2.0]
    for p in states:
        vals = [average_conditional_uncertainty(p, t) for t in taus]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 0.2


def test_quadrature_order_converged(states):
    thermal, _ = states
    a = average_conditional_uncertainty(thermal, 0.5, 64)
    b = average_conditional_uncertainty(thermal, 0.5, 128)
    assert abs(a - b) < 1e-8


def test_uncertainty_argument_checks(states):
    thermal, _ = states
    with pytest.raises(ArgumentError):
        average_conditional_uncertainty(thermal, 0.5, 8)
    with pytest.raises(ArgumentError):
        average_conditional_uncertainty(thermal, -0.5)


def test_uncertainty_scales_with_k(states):
    _, coh = states
    a = average_conditional_uncertainty(coh, 0.4, k=1.0)
    b = average_conditional_uncertainty(coh, 0.4, k=3.0)
    assert a == pytest.approx(b, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.0, max_value=2.0), st.floats(min_value=0.2, max_value=2.0))
def test_measure_normalization_property(tau, nbar):
    sp = FockSpace(80)
    p = thermal_state(nbar, sp).diagonal
    assert measure_normalization(p, tau) == pytest.approx(1.0, abs=1e-8)


def test_lse_matches_posterior():
    sp = FockSpace(40)
    qnd = QndModel(0.7)
    psi0 = coherent_state(2.0, sp)
    path = sample_path(1.3, 13, 5)
    lse = integrate_lse(qnd.lse_model(sp), psi0, path)
    post = posterior_state(DensityMatrix.from_state(psi0), 0.7, 1.3, path.W)
    rho_lse = DensityMatrix.from_state(lse).matrix
    assert np.abs(rho_lse - post.matrix).max() < 1e-12


def test_nonzero_frequency_regression():
    # omega only adds phases: diagonal statistics unchanged, coherences rotate
    sp = FockSpace(40)
    psi0 = coherent_state(1.5, sp)
    path = sample_path(0.8, 8, 17)
    still = integrate_lse(QndModel(1.0, omega=0.0).lse_model(sp), psi0, path)
    spin = integrate_lse(QndModel(1.0, omega=2.5).lse_model(sp), psi0, path)
    assert np.allclose(np.abs(still.normalized()), np.abs(spin.normalized()), atol=1e-14)
    assert spin.log_norm == pytest.approx(still.log_norm, abs=1e-12)
    post = posterior_state(DensityMatrix.from_state(psi0), 1.0, 0.8, path.W, omega=2.5)
    assert np.abs(DensityMatrix.from_state(spin).matrix - post.matrix).max() < 1e-12
    assert not np.allclose(still.normalized(), spin.normalized())


def test_posterior_argument_checks():
    sp = FockSpace(5)
    with pytest.raises(ArgumentError):
        posterior_state(DensityMatrix.from_state(sp.basis(0)), -1.0, 1.0, 0.0)
