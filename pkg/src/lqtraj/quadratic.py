"""General quadratic drift with a quadrature measurement.

A = alpha P^2 + gamma Q^2 + xi QP + eta P + zeta Q and B = kq Q + kp P.
Conjugating B by e^{eps A} stays in span{Q, P, 1}:

    e^{-eps A} B e^{eps A} = f1(eps) Q + f2(eps) P + f3(eps),

which turns the split-step product into

    |psi(t)> = e^{A t} e^{X1 Q + X2 P} e^{X3 + i hbar Z / 2} |psi(0)>

with X_i the Ito integrals of f_i and Z the double integral of
f1 X2 - f2 X1.  The harmonic-oscillator position measurement is the case
alpha = -i/(2 hbar m), gamma = -i m omega^2/(2 hbar) - 2k, kq = sqrt(2k).
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .coherent import LinearExponential, apply_linear_exponential, GaussianWavefunction
from .coherent import apply_quadratic_exponential, quadratic_exponential_on_coherent
from .errors import ArgumentError, InvalidStateError, NumericalError
from .hilbert import FockSpace, StateVector, coherent_state, make_fock_space, matrix_exponential
from .oracle import LseModel
from .paths import TrajectoryFunctionals, WienerPath, double_ito_Z, ito_integral, wy_functionals

SERIES_SWITCH = 1e-4


class TruncationRiskWarning(UserWarning):
    pass


@dataclass(frozen=True)
class QuadraticModel:
    alpha: complex = 0j
    gamma: complex = 0j
    xi: complex = 0j
    eta: complex = 0j
    zeta: complex = 0j
    kq: complex = 0j
    kp: complex = 0j
    hbar: float = 1.0

    @property
    def lam(self) -> complex:
        """sqrt(xi^2 - 4 alpha gamma), principal branch."""
        return cmath.sqrt(self.xi**2 - 4 * self.alpha * self.gamma)

    @property
    def has_linear_drift(self) -> bool:
        return self.eta != 0 or self.zeta != 0

    def drift(self, space: FockSpace) -> np.ndarray:
        Q, P = space.Q, space.P
        return self.alpha * P @ P + self.gamma * Q @ Q + self.xi * Q @ P + self.eta * P + self.zeta * Q

    def noise(self, space: FockSpace) -> np.ndarray:
        return self.kq * space.Q + self.kp * space.P

    def lse_model(self, space: FockSpace) -> LseModel:
        if space.hbar != self.hbar:
            raise ArgumentError("model and Fock space use different hbar")
        return LseModel.from_split(self.drift(space), self.noise(space), space)


@dataclass(frozen=True)
class CoefficientTriple:
    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    f3: Callable[[np.ndarray], np.ndarray]
    C: Callable[[np.ndarray], np.ndarray]
    S: Callable[[np.ndarray], np.ndarray]


def coefficient_functions(model: QuadraticModel) -> CoefficientTriple:
    """Closures for f1, f2, f3 (vectorized over eps).

    C = cosh(i hbar lam eps) and S = sinh(i hbar lam eps).  The formulas
    only use C, S/lam and (C - 1)/lam^2, which are even in lam; for
    |lam eps| below 1e-4 they switch to their Taylor series so lam -> 0 is
    handled without division.
    """
    al, ga, xi, et, ze = model.alpha, model.gamma, model.xi, model.eta, model.zeta
    k, ka, hbar = model.kq, model.kp, model.hbar
    lam = model.lam

    def kernels(eps):
        eps = np.asarray(eps, dtype=complex)
        x = 1j * hbar * eps  # argument is lam * x
        if abs(lam) * np.max(np.abs(eps), initial=0.0) < SERIES_SWITCH:
            y = (lam * x) ** 2
            C = 1 + y / 2 + y * y / 24
            S_over = x * (1 + y / 6 + y * y / 120)
            Cm1_over = x * x * (0.5 + y / 24 + y * y / 720)
        else:
            C = np.cosh(lam * x)
            S_over = np.sinh(lam * x) / lam
            Cm1_over = (C - 1) / lam**2
        return C, S_over, Cm1_over

    def f1(eps):
        C, So, _ = kernels(eps)
        return (-2 * ka * ga + k * xi) * So + k * C

    def f2(eps):
        C, So, _ = kernels(eps)
        return (2 * k * al - ka * xi) * So + ka * C

    def f3(eps):
        _, So, Cm1 = kernels(eps)
        return (k * et * xi - 2 * k * al * ze + ka * ze * xi - 2 * ka * ga * et) * Cm1 + (k * et - ka * ze) * So

    def C_fn(eps):
        return np.cosh(1j * hbar * lam * np.asarray(eps, dtype=complex))

    def S_fn(eps):
        return np.sinh(1j * hbar * lam * np.asarray(eps, dtype=complex))

    return CoefficientTriple(f1, f2, f3, C_fn, S_fn)


def swap_relation_check(
    model: QuadraticModel,
    eps: float,
    dim: int,
    central: int | None = None,
    coefficients: CoefficientTriple | None = None,
) -> float:
    """Operator-norm residual of e^{-eps A} e^{eps B} e^{eps A} = e^{eps(f1 Q + f2 P)} e^{eps f3}.

    Both sides are built as ``dim x dim`` matrices with hbar = m = omega = 1
    units of the model; the residual is taken on the lowest ``central``
    levels (default dim // 3), away from the truncation edge.
    """
    space = make_fock_space(dim, hbar=model.hbar)
    coeffs = coefficients or coefficient_functions(model)
    central = dim // 3 if central is None else central
    A, B = model.drift(space), model.noise(space)
    lhs = matrix_exponential(-eps * A) @ matrix_exponential(eps * B) @ matrix_exponential(eps * A)
    f1, f2, f3 = (complex(np.asarray(f(np.array([eps])))[0]) for f in (coeffs.f1, coeffs.f2, coeffs.f3))
    rhs = matrix_exponential(eps * (f1 * space.Q + f2 * space.P)) * cmath.exp(eps * f3)
    return float(np.linalg.norm((lhs - rhs)[:central, :central], 2))


def trajectory_functionals(model: QuadraticModel, path: WienerPath) -> TrajectoryFunctionals:
    c = coefficient_functions(model)
    W, Y = wy_functionals(path)
    return TrajectoryFunctionals(
        W=W,
        Y=Y,
        X1=ito_integral(path, c.f1),
        X2=ito_integral(path, c.f2),
        X3=ito_integral(path, c.f3),
        Z=double_ito_Z(path, c.f1, c.f2),
    )


def _scalar_log(model: QuadraticModel, fn: TrajectoryFunctionals, include_z: bool) -> complex:
    return fn.X3 + (0.5j * model.hbar * fn.Z if include_z else 0)


def evolve_state(
    model: QuadraticModel,
    psi0: StateVector,
    t: float,
    functionals: TrajectoryFunctionals,
    *,
    route: str = "auto",
    include_z: bool = True,
) -> StateVector:
    """e^{A t} e^{X1 Q + X2 P} e^{X3 + i hbar Z/2} psi0.

    ``route="coherent"`` (chosen automatically for coherent inputs when A
    has no linear terms) uses the closed-form coherent-state algebra;
    ``route="dense"`` uses matrix exponentials on the truncated space.
    """
    space = psi0.space
    if route not in ("auto", "dense", "coherent"):
        raise ArgumentError(f"unknown route {route!r}")
    coherent_ok = psi0.coherent_amplitude is not None and not model.has_linear_drift
    if route == "coherent" and not coherent_ok:
        raise ArgumentError("coherent route needs a coherent input and A without linear terms")
    scalar = _scalar_log(model, functionals, include_z)
    if route == "coherent" or (route == "auto" and coherent_ok):
        le = LinearExponential.from_pq(functionals.X2, functionals.X1, space)
        shifted, log_lin = apply_linear_exponential(le, psi0.coherent_amplitude)
        bound = abs(shifted) ** 2 + 6 * abs(shifted)
        if bound > 0.8 * space.dim:
            warnings.warn(
                f"shifted coherent amplitude {abs(shifted):.3g} is close to the truncation tail (dim={space.dim})",
                TruncationRiskWarning,
                stacklevel=2,
            )
        return quadratic_exponential_on_coherent(
            model.alpha * t, model.gamma * t, model.xi * t, shifted, space,
            log_scale=log_lin + scalar + psi0.log_scale,
        )
    lin = matrix_exponential(functionals.X1 * space.Q + functionals.X2 * space.P)
    prop = matrix_exponential(model.drift(space) * t)
    out = StateVector(prop @ (lin @ psi0.amplitudes), space, psi0.log_scale)
    return out.scaled(scalar)


def evolve_wavefunction(
    model: QuadraticModel, alpha: complex, t: float, functionals: TrajectoryFunctionals, space: FockSpace
) -> GaussianWavefunction:
    """Position wavefunction of the evolved coherent state |alpha> (closed form)."""
    if model.has_linear_drift:
        raise ArgumentError("closed-form wavefunction needs A without linear terms")
    le = LinearExponential.from_pq(functionals.X2, functionals.X1, space)
    shifted, log_lin = apply_linear_exponential(le, alpha)
    g = apply_quadratic_exponential(model.alpha * t, model.gamma * t, model.xi * t, shifted, space)
    extra = log_lin + _scalar_log(model, functionals, True)
    return GaussianWavefunction(g.s2prime, g.lin, g.log_norm + extra)


@dataclass(frozen=True)
class HOPositionModel:
    """Harmonic oscillator with continuous position measurement of strength k."""

    mass: float = 1.0
    omega: float = 1.0
    k: float = 0.5
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("mass", "omega", "k", "hbar"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")

    @classmethod
    def from_ratio(cls, r: float, mass: float = 1.0, omega: float = 1.0, hbar: float = 1.0) -> "HOPositionModel":
        if not r > 0:
            raise ArgumentError(f"r must be positive, got {r}")
        return cls(mass, omega, mass * omega**2 / (2 * hbar * r), hbar)

    @property
    def s2(self) -> float:
        return self.mass * self.omega / (2 * self.hbar)

    @property
    def r(self) -> float:
        return self.mass * self.omega**2 / (2 * self.hbar * self.k)

    @cached_property
    def z(self) -> complex:
        z = cmath.sqrt(2j / self.r - 1)
        assert z.imag > 0
        return z

    def l_of_t(self, t: float) -> complex:
        """-1/2 / (r z coth(z omega t) + 1 + i r), evaluated through tanh so t = 0 gives 0."""
        th = cmath.tanh(self.z * self.omega * t)
        return -0.5 * th / (self.r * self.z + (1 + 1j * self.r) * th)

    def quadratic_model(self) -> QuadraticModel:
        return QuadraticModel(
            alpha=-1j / (2 * self.hbar * self.mass),
            gamma=-1j * self.mass * self.omega**2 / (2 * self.hbar) - 2 * self.k,
            kq=math.sqrt(2 * self.k),
            hbar=self.hbar,
        )

    def space(self, dim: int) -> FockSpace:
        return make_fock_space(dim, self.hbar, self.mass, self.omega)


def ho_position_s2(hom: HOPositionModel, t: float) -> complex:
    """Coefficient s'^2 of -x^2 after time t (tanh form)."""
    if t < 0:
        raise ArgumentError(f"t must be nonnegative, got {t}")
    iz = 1j * hom.z
    th = cmath.tanh(hom.z * hom.omega * t)
    den = th - iz
    if abs(den) < 1e-14:
        raise NumericalError("tanh(z omega t) = i z pole reached")
    return hom.s2 * iz * (iz * th - 1) / den


def ho_position_s2_lform(hom: HOPositionModel, t: float) -> complex:
    """The same coefficient from l: s^2 (1-2l)/(3-2l) [1 + 2 (1-2l)/(1+2l)]."""
    l = hom.l_of_t(t)
    return hom.s2 * (1 - 2 * l) / (3 - 2 * l) * (1 + 2 * (1 - 2 * l) / (1 + 2 * l))


def ho_position_s2_limit(hom: HOPositionModel) -> complex:
    return -1j * hom.s2 * hom.z


def ho_conditional_x_variance(s2prime: complex) -> float:
    if not s2prime.real > 0:
        raise InvalidStateError(f"Re(s'^2) = {s2prime.real} is not positive; state is not normalizable")
    return 1.0 / (4.0 * s2prime.real)


def ho_steady_state_variance(hom: HOPositionModel) -> float:
    """Long-time conditional variance 1 / (4 s^2 Im z)."""
    return 1.0 / (4.0 * hom.s2 * hom.z.imag)


def ho_initial_state(hom: HOPositionModel, alpha: complex, dim: int) -> StateVector:
    return coherent_state(alpha, hom.space(dim))


def position_cumulants(state: StateVector) -> tuple[float, float, float]:
    """Mean, variance and fourth cumulant of Q on the normalized state."""
    Q = state.space.Q
    psi = state.normalized()
    mean = np.vdot(psi, Q @ psi).real
    centred = Q - mean * state.space.identity
    c2 = centred @ centred
    m2 = np.vdot(psi, c2 @ psi).real
    m4 = np.vdot(c2 @ psi, c2 @ psi).real
    return float(mean), float(m2), float(m4 - 3 * m2 * m2)
