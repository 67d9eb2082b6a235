"""Continuous QND measurement of photon number.

With A = -i omega (n + 1/2) - 2k n^2 and B = sqrt(2k) n everything is
diagonal, so the evolution operator after time t depends on the path only
through W(t):

    V(t) = exp(A t) exp(sqrt(2k) n W),    |V|^2_n = V_n = exp(-4ktn^2 + 2 sqrt(2k) n W).

Under the Wiener measure W ~ N(0, t), and V_m(W) phi_t(W) = phi_t(W - mu_m)
with mu_m = 2 sqrt(2k) m t.  The average conditional uncertainty is thus a
mixture of Gaussian expectations, one per populated level, which is what
:func:`average_conditional_uncertainty` integrates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import ArgumentError, DegenerateStateError, InvalidStateError
from .hilbert import DensityMatrix, FockSpace
from .oracle import LseModel, MasterModel

MIN_QUADRATURE_ORDER = 16
NESTED_SPLIT = 0.4
COMPONENT_FLOOR = 1e-16
LEVEL_FLOOR = 1e-40


@dataclass(frozen=True)
class QndModel:
    k: float
    omega: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ArgumentError(f"k must be positive, got {self.k}")

    def tau(self, t: float) -> float:
        return self.k * t

    def drift(self, space: FockSpace) -> np.ndarray:
        n = np.arange(space.dim, dtype=float)
        return np.diag(-1j * self.omega * (n + 0.5) - 2.0 * self.k * n * n)

    def lse_model(self, space: FockSpace) -> LseModel:
        return LseModel.from_split(self.drift(space), math.sqrt(2.0 * self.k) * space.number, space)

    def master_model(self, space: FockSpace) -> MasterModel:
        H = space.hbar * self.omega * (space.number + 0.5 * space.identity)
        return MasterModel(H, (math.sqrt(self.k) * space.number,), space.hbar, space)


@dataclass(frozen=True)
class QndWeights:
    """V_n = exp(log_scale) * V[n]; V is scaled so its largest entry is 1."""

    V: np.ndarray
    log_scale: float
    W: float
    t: float
    k: float

    @property
    def log_V(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.V) + self.log_scale


def _log_weights(k: float, t: float, W, n: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    return -4.0 * k * t * n * n + 2.0 * math.sqrt(2.0 * k) * np.multiply.outer(W, n)


def qnd_weights(k: float, t: float, W: float, nmax: int) -> QndWeights:
    """Weights V_0..V_{nmax-1}, evaluated in log space."""
    if not k > 0:
        raise ArgumentError(f"k must be positive, got {k}")
    if t < 0:
        raise ArgumentError(f"t must be nonnegative, got {t}")
    if nmax < 1:
        raise ArgumentError(f"nmax must be positive, got {nmax}")
    logv = _log_weights(k, t, float(W), np.arange(nmax, dtype=float))
    top = float(logv.max())
    return QndWeights(np.exp(logv - top), top, float(W), float(t), float(k))


def _check_rho_diag(rho_diag) -> np.ndarray:
    p = np.asarray(rho_diag, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidStateError("rho_diag must be a finite nonnegative vector")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InvalidStateError(f"rho_diag sums to {p.sum()}, not 1")
    return p


def conditional_number_stats(rho_diag, weights: QndWeights) -> tuple[float, float]:
    """Mean and variance of n in the conditional state of one trajectory."""
    p = _check_rho_diag(rho_diag)
    if len(weights.V) != len(p):
        raise ArgumentError("weights and rho_diag have different lengths")
    mass = p * weights.V
    total = mass.sum()
    if not total > 0:
        raise DegenerateStateError("trajectory carries no probability mass")
    n = np.arange(len(p), dtype=float)
    mean = float(n @ mass / total)
    var = float(((n - mean) ** 2) @ mass / total)
    return mean, var


def _conditional_sd(log_rho: np.ndarray, k: float, t: float, W: np.ndarray, offset: int = 0) -> np.ndarray:
    """Conditional sd of n at an array of W values; log_rho covers levels offset, offset+1, ..."""
    n = np.arange(offset, offset + len(log_rho), dtype=float)
    logv = _log_weights(k, t, W, n) + log_rho
    logv -= logv.max(axis=-1, keepdims=True)
    w = np.exp(logv)
    s0 = w.sum(axis=-1)
    c = n - offset
    mean = (w @ c) / s0
    var = (w @ (c * c)) / s0 - mean * mean
    return np.sqrt(np.maximum(var, 0.0))


@lru_cache(maxsize=8)
def _nested_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for E f(Y), Y ~ N(0,1), as a two-level Gauss-Hermite product.

    Y = sqrt(1-s^2) X1 + s X2 with X1, X2 independent standard normals; the
    inner rule uses half the order. The inner spread s X2 smooths the kinks
    that the conditional sd develops between neighbouring number states,
    which a single rule resolves poorly.
    """
    x, w = np.polynomial.hermite_e.hermegauss(order)
    xi, wi = np.polynomial.hermite_e.hermegauss(max(order // 2, MIN_QUADRATURE_ORDER))
    s = NESTED_SPLIT
    y = math.sqrt(1.0 - s * s) * x[:, None] + s * xi[None, :]
    ww = (w[:, None] * wi[None, :]) / (2.0 * math.pi)
    return y.ravel(), ww.ravel()


def average_conditional_uncertainty(rho_diag, tau: float, quadrature_order: int = 64, *, k: float = 1.0) -> float:
    """Trajectory average of the conditional photon-number sd at scaled time tau.

    Evaluates the integral of sqrt(1/2 sum (n-m)^2 rho_n rho_m V_n V_m) over
    the Wiener measure, i.e. the norm-weighted mean of the conditional sd,
    for a state diagonal in the number basis.
    """
    if quadrature_order < MIN_QUADRATURE_ORDER:
        raise ArgumentError(f"quadrature order must be at least {MIN_QUADRATURE_ORDER}, got {quadrature_order}")
    if tau < 0:
        raise ArgumentError(f"tau must be nonnegative, got {tau}")
    if not k > 0:
        raise ArgumentError(f"k must be positive, got {k}")
    p = _check_rho_diag(rho_diag)
    n = np.arange(len(p), dtype=float)
    if tau == 0:
        mean = n @ p
        return float(math.sqrt(max(((n - mean) ** 2) @ p, 0.0)))
    t = tau / k
    y, wq = _nested_rule(quadrature_order)
    # Levels far below the peak population never carry weight at the nodes,
    # and components below COMPONENT_FLOOR change the result by < 1e-14.
    top = p.max()
    levels = np.flatnonzero(p > LEVEL_FLOOR * top)
    lo, hi = levels[0], levels[-1] + 1
    with np.errstate(divide="ignore"):
        log_rho = np.log(p[lo:hi])
    total = 0.0
    for m in np.flatnonzero(p > COMPONENT_FLOOR * top):
        mu = 2.0 * math.sqrt(2.0 * k) * m * t
        sd = _conditional_sd(log_rho, k, t, mu + math.sqrt(t) * y, offset=lo)
        total += p[m] * float(sd @ wq)
    return total


def measure_normalization(rho_diag, tau: float, *, k: float = 1.0, points_per_sd: int = 16) -> float:
    """Integral of sum_n rho_n V_n over W ~ N(0, t), by direct trapezoid quadrature.

    Does not use the mixture identity, so it independently checks that the
    weights define a probability measure over trajectories.
    """
    p = _check_rho_diag(rho_diag)
    if tau == 0:
        return float(p.sum())
    t = tau / k
    sd = math.sqrt(t)
    occupied = np.flatnonzero(p)
    lo = -12.0 * sd
    hi = 2.0 * math.sqrt(2.0 * k) * occupied.max() * t + 12.0 * sd
    h = sd / points_per_sd
    W = np.arange(lo, hi + h, h)
    with np.errstate(divide="ignore"):
        log_rho = np.log(p)
    n = np.arange(len(p), dtype=float)
    logf = logsumexp(_log_weights(k, t, W, n) + log_rho, axis=-1) - W * W / (2.0 * t) - 0.5 * math.log(2 * math.pi * t)
    return float(np.exp(logsumexp(logf)) * h)


def posterior_state(rho0: DensityMatrix, k: float, t: float, W: float, omega: float = 0.0) -> DensityMatrix:
    """Normalized V(t) rho0 V(t)^dag for the path value W(t)."""
    if not k > 0 or t < 0:
        raise ArgumentError("need k > 0 and t >= 0")
    n = np.arange(rho0.space.dim, dtype=float)
    log_v = -2.0 * k * t * n * n + math.sqrt(2.0 * k) * n * W
    phase = np.exp(-1j * omega * (n + 0.5) * t)
    scale = np.exp(log_v - log_v.max()) * phase
    rho = scale[:, None] * rho0.matrix * scale.conj()[None, :]
    tr = np.trace(rho).real
    if not tr > 0:
        raise DegenerateStateError("posterior has vanishing trace")
    rho = rho / tr
    return DensityMatrix(0.5 * (rho + rho.conj().T), rho0.space)


def number_sd_functional(space: FockSpace):
    """Conditional sd of n on a normalized state vector, for ensemble estimates."""
    n = np.arange(space.dim, dtype=float)

    def sd(psi: np.ndarray) -> float:
        p = np.abs(psi) ** 2
        p = p / p.sum()
        mean = n @ p
        return math.sqrt(max(((n - mean) ** 2) @ p, 0.0))

    return sd
