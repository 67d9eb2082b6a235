from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lqtraj.errors import ArgumentError, DegenerateStateError, InvalidDimensionError, TruncationError
from lqtraj.hilbert import (
    DensityMatrix,
    FockSpace,
    StateVector,
    coherent_state,
    expectation,
    fidelity,
    matrix_exponential,
    thermal_state,
    variance,
)


def test_commutator_away_from_edge():
    sp = FockSpace(30)
    comm = sp.Q @ sp.P - sp.P @ sp.Q
    assert np.allclose(comm[:-1, :-1], 1j * np.eye(29), atol=1e-12)


def test_ladder_number_relation():
    sp = FockSpace(12)
    assert np.allclose(sp.adag @ sp.a, sp.number)


def test_operators_are_read_only():
    sp = FockSpace(5)
    with pytest.raises(ValueError):
        sp.a[0, 1] = 3.0


@pytest.mark.parametrize("dim", [0, 1, 2.5, -3])
def test_bad_dimension(dim):
    with pytest.raises(InvalidDimensionError):
        FockSpace(dim)


def test_units_enter_quadratures():
    sp = FockSpace(40, hbar=2.0, mass=3.0, omega=0.5)
    vac = sp.basis(0)
    assert variance(vac, sp.Q) == pytest.approx(2.0 / (2 * 3.0 * 0.5), rel=1e-12)
    assert variance(vac, sp.P) == pytest.approx(3.0 * 2.0 * 0.5 / 2, rel=1e-12)


def test_coherent_state_is_eigenvector():
    sp = FockSpace(30)
    psi = coherent_state(1.0, sp)
    assert abs(expectation(psi, sp.a) - 1.0) < 1e-10
    assert abs(psi.norm_sq - 1.0) < 1e-12


def test_coherent_truncation_guard():
    with pytest.raises(TruncationError):
        coherent_state(5.0, FockSpace(20))


def test_thermal_state_mean_and_tail():
    sp = FockSpace(128)
    rho = thermal_state(4.0, sp)
    n = np.arange(sp.dim)
    assert rho.diagonal @ n == pytest.approx(4.0, abs=1e-9)
    with pytest.raises(TruncationError):
        thermal_state(4.0, FockSpace(40))
    with pytest.raises(ArgumentError):
        thermal_state(-1.0, sp)


def test_state_scale_round_trip():
    sp = FockSpace(6)
    psi = sp.basis(2).scaled(800.0 + 0.3j)
    assert psi.log_norm == pytest.approx(800.0)
    assert np.allclose(psi.normalized()[2], np.exp(0.3j))


def test_zero_state_normalization_fails():
    with pytest.raises(DegenerateStateError):
        StateVector(np.zeros(4), FockSpace(4)).normalized()


def test_density_matrix_from_state():
    sp = FockSpace(10)
    rho = DensityMatrix.from_state(coherent_state(0.5, sp))
    assert rho.purity() == pytest.approx(1.0)
    assert rho.trace == pytest.approx(1.0)


def test_fidelity_ignores_phase_and_scale():
    sp = FockSpace(10)
    a = coherent_state(0.7j, sp)
    assert fidelity(a, a.scaled(3.0 + 1.1j)) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.floats(min_value=0.1, max_value=10.0))
def test_expm_inverse(seed, size):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    M *= size / np.linalg.norm(M, 2)
    prod = matrix_exponential(M) @ matrix_exponential(-M)
    assert np.abs(prod - np.eye(8)).max() < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-2, max_value=2), st.floats(min_value=-2, max_value=2))
def test_coherent_quadrature_means(re, im):
    sp = FockSpace(60)
    psi = coherent_state(complex(re, im), sp)
    s = sp.s
    assert expectation(psi, sp.Q).real == pytest.approx(re / s, abs=1e-9)
    assert expectation(psi, sp.P).real == pytest.approx(2 * s * sp.hbar * im, abs=1e-9)
    assert variance(psi, sp.Q) == pytest.approx(1 / (4 * s * s), rel=1e-8)
    assert math.isclose(psi.norm_sq, 1.0, rel_tol=1e-12)
