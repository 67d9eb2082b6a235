"""Closed-form action of linear and quadratic exponentials on coherent states.

Position wavefunctions are stored as Gaussians
psi(x) = exp(-s2prime x^2 + lin x + log_norm); Fock-space results are
returned as :class:`~lqtraj.hilbert.StateVector` with the scale in
``log_scale``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import SingularDisentanglingError
from .hilbert import FockSpace, StateVector

POLE_TOL = 1e-12


@dataclass(frozen=True)
class LinearExponential:
    """exp(nu P + mu Q) written as exp(theta a + phi a^dag)."""

    theta: complex
    phi: complex
    nu: complex | None = None
    mu: complex | None = None

    @classmethod
    def from_pq(cls, nu: complex, mu: complex, space: FockSpace) -> "LinearExponential":
        s, hbar = space.s, space.hbar
        # P = i hbar s (a^dag - a), Q = (a + a^dag) / (2 s)
        theta = mu / (2.0 * s) - 1j * hbar * s * nu
        phi = mu / (2.0 * s) + 1j * hbar * s * nu
        return cls(complex(theta), complex(phi), complex(nu), complex(mu))


def apply_linear_exponential(le: LinearExponential, alpha: complex) -> tuple[complex, complex]:
    """exp(theta a + phi a^dag)|alpha> = exp(log_norm) |alpha + phi>."""
    theta, phi = le.theta, le.phi
    log_norm = 0.5 * abs(phi) ** 2 + (alpha * phi.conjugate()).real + theta * alpha + theta * phi / 2.0
    return alpha + phi, complex(log_norm)


@dataclass(frozen=True)
class DisentangledQuadratic:
    """exp(u a^2 + v a^dag^2 + w a^dag a) = exp(prefactor) e^{l a^dag^2} e^{chi a^dag a} e^{m a^2}."""

    u: complex
    v: complex
    w: complex
    l: complex
    chi: complex
    m_coef: complex
    f: complex

    @property
    def prefactor(self) -> complex:
        return (self.chi - self.w) / 2.0


def _cosh_sinhc(f: complex) -> tuple[complex, complex]:
    # both even in f, so the branch of the square root never matters
    if abs(f) < 1e-4:
        f2 = f * f
        return 1.0 + f2 / 2.0 + f2 * f2 / 24.0, 1.0 + f2 / 6.0 + f2 * f2 / 120.0
    return cmath.cosh(f), cmath.sinh(f) / f


def disentangle_quadratic(u: complex, v: complex, w: complex) -> DisentangledQuadratic:
    u, v, w = complex(u), complex(v), complex(w)
    f = cmath.sqrt(w * w - 4.0 * u * v)
    ch, shc = _cosh_sinhc(f)
    denom = ch / shc - w  # f coth f - w
    if abs(denom) < POLE_TOL:
        raise SingularDisentanglingError(f"f coth f - w = {denom:.3e} is at a pole (u={u}, v={v}, w={w})")
    chi = -cmath.log(ch - w * shc)
    return DisentangledQuadratic(u, v, w, v / denom, chi, u / denom, f)


def quadratic_to_ladder(eta: complex, zeta: complex, xi: complex, space: FockSpace):
    """(u, v, w, c0) with eta P^2 + zeta Q^2 + xi QP = u a^2 + v a^dag^2 + w a^dag a + c0."""
    hbar, m, om = space.hbar, space.mass, space.omega
    base = zeta * hbar / (2 * m * om) - eta * m * hbar * om / 2
    u = base - 0.5j * xi * hbar
    v = base + 0.5j * xi * hbar
    w = zeta * hbar / (m * om) + eta * m * hbar * om
    return complex(u), complex(v), complex(w), complex(w / 2 + 0.5j * xi * hbar)


@dataclass(frozen=True)
class GaussianWavefunction:
    """psi(x) = exp(-s2prime x^2 + lin x + log_norm)."""

    s2prime: complex
    lin: complex
    log_norm: complex

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.s2prime * x**2 + self.lin * x + self.log_norm)

    @property
    def var_x(self) -> float:
        return 1.0 / (4.0 * self.s2prime.real)

    @property
    def mean_x(self) -> float:
        return self.lin.real / (2.0 * self.s2prime.real)

    @property
    def log_norm_sq(self) -> float:
        a = 2.0 * self.s2prime.real
        b = 2.0 * self.lin.real
        return 0.5 * math.log(math.pi / a) + b * b / (4.0 * a) + 2.0 * self.log_norm.real


def coherent_wavefunction(alpha: complex, space: FockSpace) -> GaussianWavefunction:
    """<x|alpha>, including the -i Re(alpha) Im(alpha) phase."""
    s = space.s
    alpha = complex(alpha)
    log_norm = 0.25 * math.log(2 * s * s / math.pi) - 0.5 * (abs(alpha) ** 2 + alpha * alpha)
    return GaussianWavefunction(complex(s * s), 2 * s * alpha, complex(log_norm))


def _check_poles(l: complex) -> None:
    if abs(1 + 2 * l) < POLE_TOL or abs(3 - 2 * l) < POLE_TOL:
        raise SingularDisentanglingError(f"l = {l} sits on a pole of the squeezed wavefunction")


def apply_quadratic_exponential(
    eta: complex, zeta: complex, xi: complex, alpha: complex, space: FockSpace
) -> GaussianWavefunction:
    """<x| exp(eta P^2 + zeta Q^2 + xi QP) |alpha> as a Gaussian."""
    u, v, w, c0 = quadratic_to_ladder(eta, zeta, xi, space)
    dq = disentangle_quadratic(u, v, w)
    l, chi, m = dq.l, dq.chi, dq.m_coef
    _check_poles(l)
    s = space.s
    alpha = complex(alpha)
    widen = 1 + 2 * (1 - 2 * l) / (1 + 2 * l)
    s2prime = s * s * (1 - 2 * l) / (3 - 2 * l) * widen
    lin = 2 * s * alpha * cmath.exp(chi) / (3 - 2 * l) * widen
    log_norm = (
        0.25 * math.log(2 * s * s / math.pi)
        + c0
        + dq.prefactor
        + m * alpha**2
        - 0.5 * abs(alpha) ** 2
        - alpha**2 * cmath.exp(2 * chi) / (2 * (1 + 2 * l))
        - 0.5 * cmath.log(1 + 2 * l)
    )
    return GaussianWavefunction(complex(s2prime), complex(lin), complex(log_norm))


def squeezed_coherent_amplitudes(l: complex, gamma: complex, dim: int) -> tuple[np.ndarray, float]:
    """Fock amplitudes of e^{l a^dag^2} e^{gamma a^dag}|0>, as (amplitudes, log scale)."""
    h = np.zeros(dim, dtype=complex)
    h[0] = 1.0
    log_scale = 0.0
    if dim > 1:
        h[1] = gamma
    for n in range(2, dim):
        h[n] = (gamma * h[n - 1] + 2 * l * math.sqrt(n - 1) * h[n - 2]) / math.sqrt(n)
        big = abs(h[n])
        if big > 1e100:
            h[: n + 1] /= big
            log_scale += math.log(big)
    return h, log_scale


def quadratic_exponential_on_coherent(
    eta: complex, zeta: complex, xi: complex, alpha: complex, space: FockSpace, log_scale: complex = 0.0
) -> StateVector:
    """Fock amplitudes of exp(eta P^2 + zeta Q^2 + xi QP)|alpha>, times exp(log_scale)."""
    u, v, w, c0 = quadratic_to_ladder(eta, zeta, xi, space)
    dq = disentangle_quadratic(u, v, w)
    gamma = complex(alpha) * cmath.exp(dq.chi)
    amps, extra = squeezed_coherent_amplitudes(dq.l, gamma, space.dim)
    log_pref = c0 + dq.prefactor + dq.m_coef * alpha**2 - 0.5 * abs(alpha) ** 2 + extra + log_scale
    return StateVector(amps, space).scaled(log_pref)


class Factorized(NamedTuple):
    """An unnormalized result split as O(X)|psi> times exp(log_scalar)."""

    state: StateVector
    log_scalar: complex


def strip_normalization(operator_factorization: Callable[..., Factorized]) -> Callable[..., StateVector]:
    """Wrap a factorized evolution so it returns the normalized state.

    Only the operator part is used; the scalar factor cancels under
    normalization, so the variables it depends on can be dropped.
    """

    def normalized(*args, **kwargs) -> StateVector:
        part = operator_factorization(*args, **kwargs)
        return StateVector(part.state.normalized(), part.state.space)

    return normalized
