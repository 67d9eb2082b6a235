"""Momentum measurement of a particle in a linear potential.

H = P^2/2m - F Q with measured observable P (strength k).  Disentangling
the split-step product gives

    |psi(t)> = exp(i F Q t / hbar) exp(eta (-P^2 t - P F t^2 - F^2 t^3 / 3))
               exp(sqrt(2k) (P W + F Y)) |psi(0)>,    eta = i/(2 hbar m) + 2k,

so in the momentum representation a Gaussian stays Gaussian: the two right
factors multiply the wavefunction and the left one translates p -> p + F t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ArgumentError, UnsupportedStateError
from .hilbert import FockSpace
from .oracle import LseModel, MasterModel


@dataclass(frozen=True)
class LinearPotentialModel:
    mass: float = 1.0
    force: float = 0.0
    k: float = 0.25
    hbar: float = 1.0

    def __post_init__(self):
        if not self.mass > 0 or not self.k > 0 or not self.hbar > 0:
            raise ArgumentError("mass, k and hbar must be positive")

    @property
    def eta(self) -> complex:
        return 1j / (2.0 * self.hbar * self.mass) + 2.0 * self.k

    def _check_space(self, space: FockSpace) -> None:
        if space.hbar != self.hbar or space.mass != self.mass:
            raise ArgumentError("Fock space units must match the model's hbar and mass")

    def lse_model(self, space: FockSpace) -> LseModel:
        self._check_space(space)
        P, Q = space.P, space.Q
        A = -self.eta * P @ P + (1j * self.force / self.hbar) * Q
        return LseModel.from_split(A, math.sqrt(2.0 * self.k) * P, space)

    def master_model(self, space: FockSpace) -> MasterModel:
        self._check_space(space)
        H = space.P @ space.P / (2.0 * self.mass) - self.force * space.Q
        H = 0.5 * (H + H.conj().T)
        return MasterModel(H, (math.sqrt(self.k) * space.P,), self.hbar, space)


@dataclass(frozen=True)
class GaussianMomentumState:
    """Psi(p) = exp(quad_coeff p^2 + lin_coeff p + log_norm) in the momentum representation."""

    quad_coeff: complex
    lin_coeff: complex
    log_norm: complex = 0j
    hbar: float = 1.0

    def __post_init__(self):
        if not self.quad_coeff.real < 0:
            raise UnsupportedStateError(f"Re(quad_coeff) = {self.quad_coeff.real} must be negative")

    @classmethod
    def oscillator_ground(cls, mass: float = 1.0, omega: float = 1.0, hbar: float = 1.0,
                          mean_p: float = 0.0) -> "GaussianMomentumState":
        """Normalized ground state of an oscillator, optionally boosted to mean_p."""
        var = mass * hbar * omega / 2.0
        c = -1.0 / (4.0 * var)
        log_norm = -0.25 * math.log(2.0 * math.pi * var) + c * mean_p**2
        return cls(complex(c), complex(-2.0 * c * mean_p), complex(log_norm), hbar)

    @property
    def var_p(self) -> float:
        return -1.0 / (4.0 * self.quad_coeff.real)

    @property
    def mean_p(self) -> float:
        return -self.lin_coeff.real / (2.0 * self.quad_coeff.real)

    @property
    def mean_q(self) -> float:
        # Q = i hbar d/dp in this representation
        return -self.hbar * (2.0 * self.quad_coeff.imag * self.mean_p + self.lin_coeff.imag)

    @property
    def log_norm_sq(self) -> float:
        """Log of the squared norm (integral of |Psi(p)|^2)."""
        a = -2.0 * self.quad_coeff.real
        b = 2.0 * self.lin_coeff.real
        return 0.5 * math.log(math.pi / a) + b * b / (4.0 * a) + 2.0 * self.log_norm.real

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return np.exp(self.quad_coeff * p * p + self.lin_coeff * p + self.log_norm)


def propagate_gaussian(
    model: LinearPotentialModel, state0: GaussianMomentumState, t: float, W: float, Y: float
) -> GaussianMomentumState:
    """Apply the disentangled propagator for path functionals (W, Y)."""
    if not isinstance(state0, GaussianMomentumState):
        raise UnsupportedStateError("closed-form propagation needs a Gaussian momentum state")
    if t < 0:
        raise ArgumentError(f"t must be nonnegative, got {t}")
    F, eta, g = model.force, model.eta, math.sqrt(2.0 * model.k)
    c = state0.quad_coeff - eta * t
    b = state0.lin_coeff + g * W - eta * F * t**2
    n = state0.log_norm + g * F * Y - eta * F**2 * t**3 / 3.0
    # translation p -> p - F t
    shift = F * t
    return GaussianMomentumState(
        complex(c), complex(b - 2.0 * c * shift), complex(n + c * shift**2 - b * shift), state0.hbar
    )


def conditional_momentum_variance(var_p0: float, k: float, t: float) -> float:
    """sigma_p^2(t) = sigma_p^2(0) / (1 + 8 k sigma_p^2(0) t), the same for every trajectory."""
    if not var_p0 > 0 or not k > 0 or t < 0:
        raise ArgumentError("need var_p0 > 0, k > 0 and t >= 0")
    return var_p0 / (1.0 + 8.0 * k * var_p0 * t)


def _gaussian_moment(mean: float, var: float, j: int) -> float:
    # E[(mu + sigma Z)^j] via the even central moments (j-1)!! sigma^j
    total = 0.0
    for i in range(0, j + 1, 2):
        total += comb(j, i) * mean ** (j - i) * var ** (i // 2) * _double_factorial(i - 1)
    return total


def _double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * _double_factorial(n - 2)


def averaged_momentum_moment(state0: GaussianMomentumState, F: float, t: float, n: int) -> float:
    """Trajectory-averaged <p(t)^n> = <(p(0) + F t)^n> for n = 1..4."""
    if n not in (1, 2, 3, 4):
        raise ArgumentError(f"moment order must be 1..4, got {n}")
    return _gaussian_moment(state0.mean_p + F * t, state0.var_p, n)


def momentum_stats(psi: np.ndarray, space: FockSpace) -> tuple[float, float]:
    """(mean, variance) of P on a normalized Fock-basis vector."""
    P = space.P
    mean = np.vdot(psi, P @ psi).real
    pp = P @ psi
    return float(mean), float(np.vdot(pp, pp).real - mean * mean)
