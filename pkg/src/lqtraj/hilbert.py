"""Truncated Fock-space numerics: ladder operators, states, expectations.

Operators are plain complex ``numpy`` arrays of shape ``(dim, dim)``; the
``FockSpace`` that built them fixes the units (hbar, mass, omega).
Position and momentum follow

    Q = sqrt(hbar / 2 m omega) (a + a^dag),   P = i sqrt(m hbar omega / 2) (a^dag - a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .errors import (
    ArgumentError,
    DegenerateStateError,
    InvalidDimensionError,
    InvalidStateError,
    TruncationError,
)

DEFAULT_FIG1_DIM = 128
DEFAULT_OSCILLATOR_DIM = 80


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FockSpace:
    """A Fock space truncated to ``dim`` levels, with the oscillator units."""

    dim: int
    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidDimensionError(f"dim must be an integer >= 2, got {self.dim!r}")
        for name in ("hbar", "mass", "omega"):
            if not getattr(self, name) > 0:
                raise InvalidDimensionError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def s(self) -> float:
        """Inverse length scale sqrt(m omega / 2 hbar) of the coherent states."""
        return math.sqrt(self.mass * self.omega / (2.0 * self.hbar))

    @cached_property
    def a(self) -> np.ndarray:
        return _frozen(np.diag(np.sqrt(np.arange(1, self.dim, dtype=float)), 1).astype(complex))

    @cached_property
    def adag(self) -> np.ndarray:
        return _frozen(self.a.conj().T.copy())

    @cached_property
    def number(self) -> np.ndarray:
        return _frozen(np.diag(np.arange(self.dim, dtype=float)).astype(complex))

    @cached_property
    def Q(self) -> np.ndarray:
        return _frozen(math.sqrt(self.hbar / (2.0 * self.mass * self.omega)) * (self.a + self.adag))

    @cached_property
    def P(self) -> np.ndarray:
        return _frozen(1j * math.sqrt(self.mass * self.hbar * self.omega / 2.0) * (self.adag - self.a))

    @cached_property
    def identity(self) -> np.ndarray:
        return _frozen(np.eye(self.dim, dtype=complex))

    def basis(self, n: int) -> "StateVector":
        amps = np.zeros(self.dim, dtype=complex)
        amps[n] = 1.0
        return StateVector(amps, self)


def make_fock_space(dim: int, hbar: float = 1.0, mass: float = 1.0, omega: float = 1.0) -> FockSpace:
    return FockSpace(dim, hbar, mass, omega)


@dataclass(frozen=True)
class StateVector:
    """A possibly unnormalized pure state.

    The represented vector is ``exp(log_scale) * amplitudes``. Keeping the
    scale separate lets long stochastic runs carry norms far outside the
    floating-point range. ``coherent_amplitude`` is set when the state is
    known to be the coherent state of that amplitude (times the scale).
    """

    amplitudes: np.ndarray
    space: FockSpace
    log_scale: float = 0.0
    coherent_amplitude: complex | None = field(default=None, compare=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.dim,):
            raise InvalidDimensionError(f"expected {self.space.dim} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)) or not math.isfinite(self.log_scale):
            raise InvalidStateError("state has non-finite entries")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def log_norm(self) -> float:
        """Natural log of the vector norm."""
        nrm = np.linalg.norm(self.amplitudes)
        if nrm == 0.0:
            return -math.inf
        return self.log_scale + math.log(nrm)

    @property
    def norm_sq(self) -> float:
        return math.exp(2.0 * self.log_norm)

    def vector(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.amplitudes

    def normalized(self) -> np.ndarray:
        nrm = np.linalg.norm(self.amplitudes)
        if nrm == 0.0:
            raise DegenerateStateError("cannot normalize a zero-norm state")
        return self.amplitudes / nrm

    def scaled(self, log_factor: complex) -> "StateVector":
        """Multiply by ``exp(log_factor)``; the real part goes to ``log_scale``."""
        log_factor = complex(log_factor)
        return StateVector(
            self.amplitudes * np.exp(1j * log_factor.imag),
            self.space,
            self.log_scale + log_factor.real,
            self.coherent_amplitude,
        )


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    space: FockSpace

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (self.space.dim, self.space.dim):
            raise InvalidDimensionError(f"expected a {self.space.dim}x{self.space.dim} matrix, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InvalidStateError("density matrix has non-finite entries")
        scale = max(1.0, np.abs(mat).max())
        if np.abs(mat - mat.conj().T).max() > 1e-12 * scale:
            raise InvalidStateError("density matrix is not Hermitian")
        object.__setattr__(self, "matrix", _frozen(mat))

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        psi = state.normalized()
        return cls(np.outer(psi, psi.conj()), state.space)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityMatrix":
        tr = self.trace
        if tr == 0.0:
            raise DegenerateStateError("density matrix has zero trace")
        return DensityMatrix(self.matrix / tr, self.space)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()

    def purity(self) -> float:
        rho = self.normalized().matrix
        return float(np.vdot(rho, rho).real)


def coherent_state(alpha: complex, space: FockSpace) -> StateVector:
    """Coherent state |alpha> with amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!)."""
    alpha = complex(alpha)
    if abs(alpha) ** 2 + 6.0 * abs(alpha) > space.dim:
        raise TruncationError(
            f"coherent amplitude |alpha|={abs(alpha):.3g} needs dim >= {abs(alpha) ** 2 + 6 * abs(alpha):.1f}"
        )
    amps = np.empty(space.dim, dtype=complex)
    amps[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, space.dim):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return StateVector(amps, space, coherent_amplitude=alpha)


def thermal_state(nbar: float, space: FockSpace) -> DensityMatrix:
    if nbar < 0:
        raise ArgumentError(f"nbar must be nonnegative, got {nbar}")
    if nbar == 0:
        pops = np.zeros(space.dim)
        pops[0] = 1.0
    else:
        q = nbar / (1.0 + nbar)
        if q**space.dim > 1e-12:
            raise TruncationError(f"thermal tail q^dim = {q ** space.dim:.2e} exceeds 1e-12 (nbar={nbar}, dim={space.dim})")
        pops = q ** np.arange(space.dim)
        pops /= pops.sum()
    return DensityMatrix(np.diag(pops).astype(complex), space)


def matrix_exponential(M: np.ndarray) -> np.ndarray:
    return expm(np.asarray(M, dtype=complex))


def expectation(state: StateVector | DensityMatrix, op: np.ndarray) -> complex:
    """<op> on the normalized state."""
    if isinstance(state, DensityMatrix):
        return complex(np.trace(state.normalized().matrix @ op))
    psi = state.normalized()
    return complex(np.vdot(psi, op @ psi))


def variance(state: StateVector | DensityMatrix, op: np.ndarray) -> float:
    mean = expectation(state, op)
    second = expectation(state, op @ op)
    return float((second - mean * mean).real)


def fidelity(left: StateVector, right: StateVector) -> float:
    """|<psi|phi>|^2 between the normalized states."""
    return float(abs(np.vdot(left.normalized(), right.normalized())) ** 2)
