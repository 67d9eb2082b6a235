"""Brute-force integrators used as independent checks on the closed forms.

``integrate_lse`` steps the linear stochastic equation
d|psi> = (A_tilde dt + B dW)|psi> with the split rule
|psi_{n}> = e^{A dt} e^{B dW_n} |psi_{n-1}>, A = A_tilde - B^2/2, and
``integrate_master`` runs fixed-step RK4 on the Lindblad equation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import schur
from scipy.special import logsumexp

from .errors import ArgumentError, InvalidDimensionError, InvalidStateError, NumericalError
from .hilbert import DensityMatrix, FockSpace, StateVector, matrix_exponential
from .paths import WienerPath, path_rng


class StepSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LseModel:
    """LSE d|psi> = (A_tilde dt + B dW)|psi> on a truncated space."""

    A_tilde: np.ndarray
    B: np.ndarray
    space: FockSpace | None = field(default=None, compare=False)

    def __post_init__(self):
        at = np.array(self.A_tilde, dtype=complex)
        b = np.array(self.B, dtype=complex)
        if at.shape != b.shape or at.ndim != 2 or at.shape[0] != at.shape[1]:
            raise InvalidDimensionError(f"A_tilde {at.shape} and B {b.shape} must be matching square matrices")
        if self.space is not None and at.shape[0] != self.space.dim:
            raise InvalidDimensionError("operators do not match the Fock space dimension")
        at.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A_tilde", at)
        object.__setattr__(self, "B", b)

    @classmethod
    def from_split(cls, A: np.ndarray, B: np.ndarray, space: FockSpace | None = None) -> "LseModel":
        """Build from the split-step drift A (= A_tilde - B^2/2)."""
        B = np.asarray(B, dtype=complex)
        return cls(np.asarray(A, dtype=complex) + 0.5 * B @ B, B, space)

    @classmethod
    def from_master(cls, master: "MasterModel") -> "LseModel":
        """The LSE unravelling a single-operator master equation."""
        if len(master.lindblads) != 1:
            raise ArgumentError("only single-noise LSEs are supported")
        (O,) = master.lindblads
        A_tilde = -1j * master.H / master.hbar - O.conj().T @ O
        return cls(A_tilde, math.sqrt(2.0) * O, master.space)

    @cached_property
    def A(self) -> np.ndarray:
        A = self.A_tilde - 0.5 * self.B @ self.B
        A.setflags(write=False)
        return A

    @property
    def dim(self) -> int:
        return self.A_tilde.shape[0]


@dataclass(frozen=True)
class MasterModel:
    """rho' = -(i/hbar)[H, rho] + sum_n (2 O rho O^dag - O^dag O rho - rho O^dag O)."""

    H: np.ndarray
    lindblads: tuple[np.ndarray, ...]
    hbar: float = 1.0
    space: FockSpace | None = field(default=None, compare=False)

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        if np.abs(H - H.conj().T).max() >= 1e-12 * max(1.0, np.abs(H).max()):
            raise InvalidStateError("H must be Hermitian")
        ops = tuple(np.array(o, dtype=complex) for o in self.lindblads)
        for o in ops:
            if o.shape != H.shape:
                raise InvalidDimensionError("Lindblad operator shape does not match H")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "lindblads", ops)


class SplitStepper:
    """Precomputed split step e^{A dt} e^{B dW} for a fixed dt.

    e^{B dW} is applied in the eigenbasis of B, so each step is one
    elementwise exponential and one matrix product (or an elementwise
    product when A is diagonal there too).
    """

    def __init__(self, model: LseModel, dt: float):
        if not dt > 0:
            raise ArgumentError(f"dt must be positive, got {dt}")
        self.model = model
        self.dt = dt
        A, B = model.A, model.B
        if not np.any(B - np.diag(np.diag(B))):
            self.lam = np.diag(B).copy()
            self.V = self.Vinv = None
            self.unitary = True
        else:
            T, Zs = schur(B, output="complex")
            off = T - np.diag(np.diag(T))
            if np.abs(off).max() <= 1e-10 * max(1.0, np.abs(T).max()):
                self.lam = np.diag(T).copy()
                self.V, self.Vinv = Zs, Zs.conj().T
                self.unitary = True
            else:
                lam, V = np.linalg.eig(B)
                if np.linalg.cond(V) > 1e8:
                    raise NumericalError("B is not diagonalizable to working precision")
                self.lam, self.V, self.Vinv = lam, V, np.linalg.inv(V)
                self.unitary = False
        Ae = A if self.V is None else self.Vinv @ A @ self.V
        off = Ae - np.diag(np.diag(Ae))
        if not np.any(off) or (self.V is not None and np.abs(off).max() <= 1e-13 * max(1.0, np.abs(Ae).max())):
            # diagonal drift: keep log K exactly, e^{A_nn dt} may underflow
            self.K = None
            self.log_K = np.diag(Ae) * dt
        else:
            expA = matrix_exponential(A * dt)
            self.K = expA if self.V is None else self.Vinv @ expA @ self.V
            self.log_K = None
        comm = A @ B - B @ A
        if np.abs(comm).max() > 1e-12 * max(1.0, np.abs(A).max() * np.abs(B).max()):
            a_norm = np.linalg.norm(A, 2)
            if a_norm * dt > 0.1:
                warnings.warn(
                    f"split step has ||A|| dt = {a_norm * dt:.3g} > 0.1; consider a smaller dt",
                    StepSizeWarning,
                    stacklevel=3,
                )
        # Hermitian part of B, for the drift of the physical measure
        self._b_herm = B + B.conj().T
        # A and B jointly diagonal with real noise eigenvalues: the one-step law
        # of dW under the physical measure is a Gaussian mixture over levels
        self.mixture = None
        if self.unitary and self.K is None and np.all(np.abs(self.lam.imag) <= 1e-14 * max(1.0, np.abs(self.lam).max())):
            lam = self.lam.real
            log_c = 2.0 * self.log_K.real + 2.0 * lam * lam * dt
            self.mixture = (log_c, 2.0 * lam * dt)

    def to_eigen(self, psi: np.ndarray) -> np.ndarray:
        return psi if self.V is None else self.Vinv @ psi

    def from_eigen(self, y: np.ndarray) -> np.ndarray:
        return y if self.V is None else self.V @ y

    def step(self, y: np.ndarray, dW: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One split step on the columns of y; returns (y', log_shift).

        The true result is exp(log_shift) * y'; the shift keeps the
        exponentials finite for large increments.
        """
        expo = np.multiply.outer(self.lam, dW)
        if self.K is None:
            expo = expo + self.log_K[:, None]
        occupied = np.abs(y) > 0
        shift = np.max(np.where(occupied, expo.real, -np.inf), axis=0)
        shift = np.where(np.isfinite(shift), shift, 0.0)
        y = np.exp(expo - shift) * y
        if self.K is None:
            return y, shift
        return self.K @ y, shift

    def drift(self, y: np.ndarray) -> np.ndarray:
        """<B + B^dag> on the normalized states (columns of y, eigenbasis)."""
        if self.unitary:
            p = np.abs(y) ** 2
            return 2.0 * (self.lam.real @ p) / p.sum(axis=0)
        psi = self.from_eigen(y)
        num = np.einsum("it,ij,jt->t", psi.conj(), self._b_herm, psi).real
        return num / np.sum(np.abs(psi) ** 2, axis=0)

    def log_norms(self, y: np.ndarray) -> np.ndarray:
        psi = y if self.unitary else self.from_eigen(y)
        return np.log(np.linalg.norm(psi, axis=0))


CheckpointFn = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def run_split_steps(
    stepper: SplitStepper,
    psi0: np.ndarray,
    increments: np.ndarray | None = None,
    *,
    noise: np.ndarray | None = None,
    uniforms: np.ndarray | None = None,
    checkpoints: Sequence[int] = (),
    on_checkpoint: CheckpointFn | None = None,
):
    """Advance a batch of trajectories from a common initial vector.

    Exactly one of ``increments`` (Wiener increments, shape (ntraj, steps))
    or ``noise`` (standard normals, same shape) is given.  With ``noise`` the
    paths are drawn from the physical measure: dW = sqrt(dt) xi + <B+B^dag> dt,
    and the log likelihood ratio back to the Wiener measure is accumulated.
    If ``uniforms`` (same shape) is also given and the stepper is jointly
    diagonal, each dW is instead drawn from its exact one-step law, a
    Gaussian mixture whose component n is picked with probability
    proportional to |psi_n|^2 |e^{A_nn dt}|^2 e^{2 lam_n^2 dt}.

    Returns ``(psi, log_norm, log_lr, increments)`` at the final step, with
    ``psi`` the normalized states as columns.  ``on_checkpoint(step, psi,
    log_norm, log_lr)`` is called after each step listed in ``checkpoints``.
    """
    guided = noise is not None
    drive = noise if guided else increments
    if drive is None or (increments is not None and noise is not None):
        raise ArgumentError("give exactly one of increments or noise")
    mixture = uniforms is not None
    if mixture and (not guided or stepper.mixture is None):
        raise ArgumentError("mixture sampling needs noise and a jointly diagonal model")
    ntraj, steps = drive.shape
    dt = stepper.dt
    sq = math.sqrt(dt)
    y = np.repeat(stepper.to_eigen(np.asarray(psi0, dtype=complex))[:, None], ntraj, axis=1)
    scale = np.linalg.norm(y, axis=0)
    y = y / scale
    log_scale = np.log(scale)
    log_lr = np.zeros(ntraj)
    used = np.empty((ntraj, steps)) if guided else drive
    marks = set(checkpoints)
    for n in range(steps):
        if mixture:
            dW, dlr = _mixture_increment(stepper, y, drive[:, n], uniforms[:, n], sq)
            log_lr += dlr
            used[:, n] = dW
        elif guided:
            d = stepper.drift(y)
            dW = sq * drive[:, n] + d * dt
            log_lr += -d * dW + 0.5 * d * d * dt
            used[:, n] = dW
        else:
            dW = drive[:, n]
        y, shift = stepper.step(y, dW)
        log_scale += shift
        nrm = np.linalg.norm(y, axis=0)
        if not np.all(np.isfinite(nrm)) or np.any(nrm == 0.0):
            raise NumericalError(f"state norm degenerated at step {n + 1}")
        y /= nrm
        log_scale += np.log(nrm)
        if on_checkpoint is not None and (n + 1) in marks:
            psi = stepper.from_eigen(y)
            ln = log_scale + stepper.log_norms(y)
            on_checkpoint(n + 1, psi / np.linalg.norm(psi, axis=0), ln, log_lr.copy())
    psi = stepper.from_eigen(y)
    ln = log_scale + stepper.log_norms(y)
    return psi / np.linalg.norm(psi, axis=0), ln, log_lr, used


def _mixture_increment(stepper: SplitStepper, y: np.ndarray, xi: np.ndarray, u: np.ndarray, sq: float):
    log_c, shift = stepper.mixture
    with np.errstate(divide="ignore"):
        log_pi = np.log(np.abs(y) ** 2) + log_c[:, None]
    log_pi -= logsumexp(log_pi, axis=0)
    cum = np.cumsum(np.exp(log_pi), axis=0)
    comp = np.minimum((cum < u * cum[-1]).sum(axis=0), len(log_c) - 1)
    dW = shift[comp] + sq * xi
    dt = sq * sq
    log_q = logsumexp(log_pi - (dW[None, :] - shift[:, None]) ** 2 / (2.0 * dt), axis=0)
    return dW, -dW * dW / (2.0 * dt) - log_q


def integrate_lse(model: LseModel, psi0: StateVector, path: WienerPath) -> StateVector:
    """Unnormalized state at ``path.t_final`` from the split-step product."""
    if psi0.space.dim != model.dim:
        raise InvalidDimensionError("initial state and model have different dimensions")
    stepper = SplitStepper(model, path.dt)
    psi, ln, _, _ = run_split_steps(stepper, psi0.amplitudes, path.increments[None, :])
    return StateVector(psi[:, 0], psi0.space, float(ln[0]) + psi0.log_scale)


def integrate_lse_batch(model: LseModel, psi0: StateVector, increments: np.ndarray, dt: float) -> list[StateVector]:
    stepper = SplitStepper(model, dt)
    psi, ln, _, _ = run_split_steps(stepper, psi0.amplitudes, np.atleast_2d(increments))
    return [StateVector(psi[:, j], psi0.space, float(ln[j]) + psi0.log_scale) for j in range(psi.shape[1])]


@dataclass(frozen=True)
class GuidedEnsemble:
    """Trajectories sampled under the physical measure.

    ``log_weights`` hold the log likelihood ratio back to the Wiener
    measure; together with each state's norm they form the importance
    weight ||psi||^2 dP_w/dQ, whose expectation is one.
    """

    states: list[StateVector]
    log_weights: np.ndarray
    increments: np.ndarray
    dt: float


def guided_noise(seed: int, indices: Sequence[int], steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Normals and uniforms for guided sampling, one Philox stream per trajectory."""
    xi = np.empty((len(indices), steps))
    u = np.empty((len(indices), steps))
    for row, i in enumerate(indices):
        rng = path_rng(seed, i)
        xi[row] = rng.standard_normal(steps)
        u[row] = rng.random(steps)
    return xi, u


def sample_guided(
    model: LseModel,
    psi0: StateVector,
    t: float,
    steps: int,
    seed: int,
    indices: Sequence[int],
    proposal: str = "auto",
) -> GuidedEnsemble:
    """Sample trajectories from (an approximation of) the physical measure.

    ``proposal="drift"`` shifts each Wiener increment by <B + B^dag> dt;
    ``"mixture"`` draws increments from their exact one-step law (jointly
    diagonal models only); ``"auto"`` picks mixture when available.
    """
    if proposal not in ("auto", "drift", "mixture"):
        raise ArgumentError(f"unknown proposal {proposal!r}")
    dt = t / steps
    stepper = SplitStepper(model, dt)
    if proposal == "auto":
        proposal = "mixture" if stepper.mixture is not None else "drift"
    noise, u = guided_noise(seed, indices, steps)
    psi, ln, llr, used = run_split_steps(
        stepper, psi0.amplitudes, noise=noise, uniforms=u if proposal == "mixture" else None
    )
    states = [StateVector(psi[:, j], psi0.space, float(ln[j]) + psi0.log_scale) for j in range(len(indices))]
    return GuidedEnsemble(states, llr, used, dt)


def _master_rhs(G: np.ndarray, ops: Sequence[np.ndarray]):
    def rhs(rho):
        out = G @ rho
        out = out + out.conj().T
        for O in ops:
            out += 2.0 * O @ rho @ O.conj().T
        return out

    return rhs


def integrate_master(model: MasterModel, rho0: DensityMatrix, t: float, steps: int) -> DensityMatrix:
    """Classical RK4 with fixed step t/steps; Hermiticity restored each step.

    Raises :class:`NumericalError` when the trace drifts by more than 1e-9
    or the state norm blows up (step too large for RK4 stability).
    """
    if not t > 0 or steps < 1:
        raise ArgumentError("t and steps must be positive")
    h = t / steps
    M = sum((O.conj().T @ O for O in model.lindblads), np.zeros_like(model.H))
    G = -1j * model.H / model.hbar - M
    rhs = _master_rhs(G, model.lindblads)
    rho = rho0.normalized().matrix.copy()
    for n in range(steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        drift = abs(np.trace(rho).real - 1.0)
        if drift > 1e-9 or not np.isfinite(drift) or np.linalg.norm(rho) > 1.0 + 1e-6:
            raise NumericalError(
                f"master integration unstable at step {n + 1}/{steps} (trace drift {drift:.2e}); use more steps"
            )
    return DensityMatrix(rho, rho0.space)


def master_steps_for(model: MasterModel, t: float, safety: float = 0.5) -> int:
    """Step count keeping h * ||L|| below ``safety`` (bound from operator norms)."""
    M = sum((O.conj().T @ O for O in model.lindblads), np.zeros_like(model.H))
    bound = 2.0 * np.linalg.norm(-1j * model.H / model.hbar - M, 2)
    bound += 2.0 * sum(np.linalg.norm(O, 2) ** 2 for O in model.lindblads)
    return max(1, int(math.ceil(t * bound / safety)))


class Estimate(NamedTuple):
    mean: complex
    stderr: float


def ensemble_estimate(
    states: Sequence[StateVector],
    op: np.ndarray | None = None,
    *,
    functional: Callable[[np.ndarray], complex] | None = None,
    log_weights: np.ndarray | None = None,
) -> Estimate:
    """Monte Carlo estimate of the integral of <psi|O|psi>_w dP_w.

    Each trajectory contributes ``w_i * v_i`` with ``w_i = ||psi_i||^2
    exp(log_weights_i)`` and ``v_i`` either ``<O>`` or ``functional(psi)`` on
    the normalized state; the functional form gives the norm-weighted
    average of a conditional quantity (e.g. a conditional standard deviation).
    """
    if len(states) == 0:
        raise ArgumentError("ensemble is empty")
    if (op is None) == (functional is None):
        raise ArgumentError("give exactly one of op or functional")
    lw = np.zeros(len(states)) if log_weights is None else np.asarray(log_weights, dtype=float)
    terms = np.empty(len(states), dtype=complex)
    for i, st in enumerate(states):
        psi = st.normalized()
        val = np.vdot(psi, op @ psi) if functional is None else functional(psi)
        terms[i] = math.exp(2.0 * st.log_norm + lw[i]) * val
    n = len(terms)
    mean = np.sum(terms) / n
    if n > 1:
        dev = terms - mean
        stderr = math.sqrt(np.sum(np.abs(dev) ** 2) / (n - 1) / n)
    else:
        stderr = math.nan
    return Estimate(complex(mean), stderr)


def ensemble_average(
    op: np.ndarray, states: Sequence[StateVector], *, conditional: Callable[[np.ndarray], complex] | None = None
) -> complex:
    """Mean over trajectories of <psi|op|psi> (unnormalized states).

    With ``conditional`` given, averages that functional of the normalized
    state weighted by <psi|psi> instead; ``op`` is then ignored.
    """
    if conditional is not None:
        return ensemble_estimate(states, functional=conditional).mean
    return ensemble_estimate(states, op).mean


def norm_weights(states: Sequence[StateVector]) -> np.ndarray:
    return np.array([st.norm_sq for st in states])
