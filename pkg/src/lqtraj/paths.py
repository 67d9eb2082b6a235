"""Wiener paths, Ito sums and the Gaussian statistics of their functionals.

Every path is drawn from a counter-based Philox stream keyed by
``(seed, index, level)``, so trajectory ``i`` of an ensemble is the same
no matter which worker draws it or in which order.  ``level`` counts
Brownian-bridge refinements (see :func:`refine_path`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ArgumentError, NumericalError

CoefficientFn = Callable[[np.ndarray], np.ndarray]


def path_rng(seed: int, index: int = 0, level: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index), int(level)))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class WienerPath:
    dt: float
    increments: np.ndarray
    seed: int
    index: int = 0
    level: int = 0

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def steps(self) -> int:
        return len(self.increments)

    @property
    def t_final(self) -> float:
        return self.steps * self.dt

    @property
    def W(self) -> float:
        return float(self.increments.sum())

    @property
    def times(self) -> np.ndarray:
        """Left endpoints (n - 1) dt of each increment."""
        return np.arange(self.steps) * self.dt


def _check_grid(t: float, steps: int) -> None:
    if not t > 0:
        raise ArgumentError(f"t must be positive, got {t}")
    if int(steps) != steps or steps < 1:
        raise ArgumentError(f"steps must be a positive integer, got {steps}")


def sample_path(t: float, steps: int, seed: int, index: int = 0) -> WienerPath:
    _check_grid(t, steps)
    dt = t / steps
    inc = path_rng(seed, index).standard_normal(steps) * math.sqrt(dt)
    return WienerPath(dt, inc, seed, index)


def sample_increments(t: float, steps: int, seed: int, indices: Sequence[int]) -> np.ndarray:
    """Increments of many paths, shape ``(len(indices), steps)``.

    Row ``j`` equals ``sample_path(t, steps, seed, indices[j]).increments``.
    """
    _check_grid(t, steps)
    sd = math.sqrt(t / steps)
    out = np.empty((len(indices), steps))
    for row, idx in enumerate(indices):
        out[row] = path_rng(seed, idx).standard_normal(steps) * sd
    return out


def refine_path(path: WienerPath) -> WienerPath:
    """Halve ``dt`` by Brownian-bridge interpolation of every increment.

    Each coarse increment dW splits into (dW/2 + e, dW/2 - e) with
    e ~ N(0, dt/4), so the fine path has the exact Wiener law and the same
    endpoint values at the coarse grid times.
    """
    level = path.level + 1
    bridge = path_rng(path.seed, path.index, level).standard_normal(path.steps) * math.sqrt(path.dt / 4.0)
    fine = np.empty(2 * path.steps)
    fine[0::2] = 0.5 * path.increments + bridge
    fine[1::2] = 0.5 * path.increments - bridge
    return WienerPath(path.dt / 2.0, fine, path.seed, path.index, level)


def _eval(f: CoefficientFn, times: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(times), dtype=complex)
    if vals.shape == ():
        vals = np.full(times.shape, vals)
    return vals


def ito_integral(path: WienerPath, f: CoefficientFn) -> complex:
    """Left-endpoint sum of f((n-1) dt) dW_n."""
    return complex(np.sum(_eval(f, path.times) * path.increments))


def double_ito_Z(path: WienerPath, f1: CoefficientFn, f2: CoefficientFn) -> complex:
    """Sum of dW_n [f1 X2 - f2 X1] at the left endpoint, X_i the running Ito sums."""
    return complex(double_ito_Z_batch(path.increments[None, :], path.dt, f1, f2)[0])


def ito_sums_batch(increments: np.ndarray, dt: float, f: CoefficientFn) -> np.ndarray:
    """Row-wise Ito sums for a stack of paths sharing ``dt``."""
    times = np.arange(increments.shape[1]) * dt
    return increments @ _eval(f, times)


def double_ito_Z_batch(increments: np.ndarray, dt: float, f1: CoefficientFn, f2: CoefficientFn) -> np.ndarray:
    times = np.arange(increments.shape[1]) * dt
    g1 = _eval(f1, times)
    g2 = _eval(f2, times)
    x1 = np.cumsum(increments * g1, axis=1)
    x2 = np.cumsum(increments * g2, axis=1)
    # running sums strictly before step n
    x1 = np.concatenate([np.zeros((len(increments), 1)), x1[:, :-1]], axis=1)
    x2 = np.concatenate([np.zeros((len(increments), 1)), x2[:, :-1]], axis=1)
    return np.sum(increments * (g1 * x2 - g2 * x1), axis=1)


def covariance_WY(t: float) -> np.ndarray:
    """Covariance of (W(t), Y(t)) with Y(t) the Ito integral of t'."""
    if not t > 0:
        raise ArgumentError(f"t must be positive, got {t}")
    return np.array([[t, t**2 / 2.0], [t**2 / 2.0, t**3 / 3.0]])


def joint_density_WY(W, Y, t: float):
    if not t > 0:
        raise ArgumentError(f"t must be positive, got {t}")
    pref = math.sqrt(12.0) / (2.0 * math.pi * t**2)
    W = np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float)
    val = pref * np.exp(-2.0 * W**2 / t - 6.0 * Y**2 / t**3 + 6.0 * W * Y / t**2)
    return float(val) if val.ndim == 0 else val


def xi_covariance(f_i: CoefficientFn, f_j: CoefficientFn, t: float, tau: float | None = None) -> complex:
    """<X_i(t) X_j(tau)> = integral of f_i f_j over [0, min(t, tau)].

    Raises :class:`NumericalError` when adaptive quadrature does not reach
    a relative tolerance of 1e-10.
    """
    if not t > 0:
        raise ArgumentError(f"t must be positive, got {t}")
    upper = t if tau is None else min(t, tau)
    if upper <= 0:
        return 0j

    def prod(x):
        return complex(_eval(f_i, np.array([x]))[0] * _eval(f_j, np.array([x]))[0])

    parts = []
    for take in (lambda z: z.real, lambda z: z.imag):
        val, err, info = integrate.quad(lambda x: take(prod(x)), 0.0, upper, epsabs=1e-14, epsrel=1e-10,
                                        limit=200, full_output=True)[:3]
        if err > max(1e-10 * abs(val), 1e-13):
            raise NumericalError(
                f"xi_covariance did not converge on [0, {upper}]: value={val}, error={err}, evaluations={info['neval']}"
            )
        parts.append(val)
    return complex(parts[0], parts[1])


@dataclass(frozen=True)
class TrajectoryFunctionals:
    """Scalar random variables of one path that parameterize the evolution operators."""

    W: float
    Y: float
    X1: complex
    X2: complex
    X3: complex
    Z: complex


def wy_functionals(path: WienerPath) -> tuple[float, float]:
    """(W, Y) of a path, with Y the Ito sum of (n - 1) dt dW_n."""
    return path.W, float(np.dot(path.times, path.increments))
