"""Named experiments producing curve records, plus CSV/JSON export.

Trajectory ensembles are split into fixed-size chunks keyed by trajectory
index; chunks are independent tasks, and results are merged by index, so
the output bytes do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, TruncationError
from .hilbert import (
    DEFAULT_FIG1_DIM,
    DEFAULT_OSCILLATOR_DIM,
    coherent_state,
    make_fock_space,
    thermal_state,
)
from .momentum import GaussianMomentumState, LinearPotentialModel, conditional_momentum_variance, momentum_stats
from .oracle import SplitStepper, guided_noise, run_split_steps
from .paths import sample_increments
from .qnd import QndModel, average_conditional_uncertainty, number_sd_functional
from .quadratic import HOPositionModel, ho_conditional_x_variance, ho_position_s2, ho_steady_state_variance

EXPERIMENTS = ("fig1-qnd", "momentum-linear", "ho-position", "validate")
METHODS = ("closed-form", "quadrature", "monte-carlo", "master-eq")
CHUNK = 250

_DEFAULTS = {
    "fig1-qnd": {"grid": "0:2:41", "trajectories": 1000, "dim": DEFAULT_FIG1_DIM, "dt": 0.05, "k": 1.0},
    "ho-position": {"grid": "0:5:51", "trajectories": 20, "dim": DEFAULT_OSCILLATOR_DIM, "dt": 0.0005, "k": None},
    "momentum-linear": {"grid": "0:1:11", "trajectories": 20, "dim": DEFAULT_OSCILLATOR_DIM, "dt": 0.0001, "k": 0.25},
    "validate": {"grid": "0:1:2", "trajectories": 1, "dim": DEFAULT_OSCILLATOR_DIM, "dt": 0.001, "k": 1.0},
}


def parse_grid(text: str) -> np.ndarray:
    """'a:b:n' -> n points from a to b inclusive."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise ConfigurationError(f"grid must look like a:b:n, got {text!r}") from exc
    if n < 1:
        raise ConfigurationError("grid needs at least one point")
    pts = np.linspace(a, b, n)
    if n > 1 and not np.all(np.diff(pts) > 0):
        raise ConfigurationError("grid must be strictly increasing")
    if pts[0] < 0:
        raise ConfigurationError("grid must be nonnegative")
    return pts


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one run; ``None`` fields take the experiment's default."""

    experiment: str = "fig1-qnd"
    seed: int = 0
    trajectories: int | None = None
    dim: int | None = None
    dt: float | None = None
    grid: str | None = None
    k: float | None = None
    r: float = 1.0
    omega: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    force: float = 0.5
    nbar: float = 4.0
    mean_n: float = 20.0
    alpha: float = 0.0
    quadrature_order: int = 64
    output_path: str | None = None
    format: str = "csv"
    oracle: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.format not in ("csv", "json"):
            raise ConfigurationError(f"format must be csv or json, got {self.format!r}")
        if self.trajectories is not None and self.trajectories < 1:
            raise ConfigurationError("trajectories must be at least 1")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        for name in ("k", "r", "omega", "mass", "hbar"):
            if getattr(self, name) is not None and not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.grid is not None:
            parse_grid(self.grid)

    def resolved(self) -> "ExperimentConfig":
        defaults = _DEFAULTS[self.experiment]
        return replace(self, **{key: val for key, val in defaults.items() if getattr(self, key) is None})

    @property
    def grid_points(self) -> np.ndarray:
        return parse_grid(self.resolved().grid)


CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def config_from_mapping(values: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from string key/value pairs (config file or --param)."""
    base = base or ExperimentConfig()
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    updates = {}
    for key, raw in values.items():
        key = key.strip().replace("-", "_")
        if key == "out":
            key = "output_path"
        if key not in types:
            raise ConfigurationError(f"unknown config key {key!r}")
        typ = types[key]
        try:
            if "bool" in typ:
                low = raw.strip().lower()
                if low not in ("on", "off", "true", "false", "1", "0", "yes", "no"):
                    raise ValueError(raw)
                updates[key] = low in ("on", "true", "1", "yes")
            elif "int" in typ and "float" not in typ:
                updates[key] = int(raw)
            elif "float" in typ:
                updates[key] = float(raw)
            else:
                updates[key] = raw.strip()
        except ValueError as exc:
            raise ConfigurationError(f"bad value {raw!r} for {key}") from exc
    return replace(base, **updates)


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; blank lines and ``#`` comments ignored."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


@dataclass(frozen=True)
class CurveRecord:
    abscissa: float
    value: float
    stderr: float | None
    method: str
    series: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.stderr is not None) != (self.method == "monte-carlo"):
            raise ValueError("stderr is given exactly for monte-carlo records")


CSV_FIELDS = ("abscissa", "value", "stderr", "method", "series")


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def records_to_csv(records: Sequence[CurveRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rec in records:
        writer.writerow([_fmt(rec.abscissa), _fmt(rec.value), _fmt(rec.stderr), rec.method, rec.series])
    return buf.getvalue()


def records_to_json(records: Sequence[CurveRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=1) + "\n"


def write_records(records: Sequence[CurveRecord], path: str | None, fmt: str = "csv") -> str:
    text = records_to_csv(records) if fmt == "csv" else records_to_json(records)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _map_ordered(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _chunks(n: int) -> list[range]:
    return [range(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(np.sum(values) / n)
    if n == 1:
        return mean, 0.0
    return mean, float(math.sqrt(np.sum((values - mean) ** 2) / (n - 1) / n))


def _checkpoint_steps(points: np.ndarray, time_scale: float, dt: float) -> tuple[int, list[int]]:
    """Steps at which each positive grid point (in physical time point*time_scale) falls."""
    steps = []
    for p in points:
        exact = p * time_scale / dt
        n = int(round(exact))
        if abs(n - exact) > 1e-6 * max(1.0, exact):
            raise ConfigurationError(f"grid point {p} is not a multiple of dt={dt}")
        steps.append(n)
    return max(steps + [0]), steps


def _ensemble_checkpoints(
    stepper: SplitStepper,
    psi0: np.ndarray,
    seed: int,
    ntraj: int,
    total_steps: int,
    marks: Sequence[int],
    value: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    workers: int,
    guided: bool,
) -> dict[int, np.ndarray]:
    """Per-trajectory values at each checkpoint step, ordered by trajectory index."""

    def run_chunk(idx: range):
        out = {}

        def grab(step, psi, ln, llr):
            out[step] = value(psi, ln, llr)

        if guided:
            noise, u = guided_noise(seed, idx, total_steps)
            u = u if stepper.mixture is not None else None
            run_split_steps(stepper, psi0, noise=noise, uniforms=u, checkpoints=marks, on_checkpoint=grab)
        else:
            inc = sample_increments(total_steps * stepper.dt, total_steps, seed, idx)
            run_split_steps(stepper, psi0, inc, checkpoints=marks, on_checkpoint=grab)
        return out

    parts = _map_ordered(run_chunk, _chunks(ntraj), workers)
    return {m: np.concatenate([p[m] for p in parts]) for m in marks}


def fig1_initial_states(cfg: ExperimentConfig):
    """(label, rho_diag, purified amplitudes) for the thermal and coherent states."""
    space = make_fock_space(cfg.dim)
    try:
        th = thermal_state(cfg.nbar, space).diagonal
        coh = coherent_state(math.sqrt(cfg.mean_n), space)
    except TruncationError as exc:
        raise ConfigurationError(str(exc)) from exc
    # QND dynamics is diagonal, so sqrt(rho_n) reproduces all number statistics
    return space, [("thermal", th, np.sqrt(th)), ("coherent", np.abs(coh.amplitudes) ** 2, coh.amplitudes)]


def run_fig1(config: ExperimentConfig) -> list[CurveRecord]:
    """Average conditional photon-number uncertainty against tau = k t."""
    cfg = config.resolved()
    space, states = fig1_initial_states(cfg)
    taus = cfg.grid_points
    model = QndModel(cfg.k)
    records: list[CurveRecord] = []
    for label, rho, amps in states:
        vals = _map_ordered(
            lambda tau: average_conditional_uncertainty(rho, float(tau), cfg.quadrature_order, k=cfg.k),
            list(taus),
            cfg.workers,
        )
        records += [CurveRecord(float(t), float(v), None, "quadrature", label) for t, v in zip(taus, vals)]
        if not cfg.oracle:
            continue
        total, marks = _checkpoint_steps(taus, 1.0 / cfg.k, cfg.dt)
        sd = number_sd_functional(space)
        if total == 0:
            mc = {0: np.full(cfg.trajectories, sd(amps))}
        else:
            stepper = SplitStepper(model.lse_model(space), cfg.dt)

            def weighted_sd(psi, ln, llr):
                w = np.exp(2.0 * ln + llr)
                return w * np.array([sd(psi[:, j]) for j in range(psi.shape[1])])

            pos = sorted({m for m in marks if m > 0})
            mc = _ensemble_checkpoints(stepper, amps, cfg.seed, cfg.trajectories, total, pos, weighted_sd,
                                       cfg.workers, guided=True)
            mc[0] = np.full(cfg.trajectories, sd(amps))
        for tau, m in zip(taus, marks):
            mean, err = _mean_stderr(mc[m])
            records.append(CurveRecord(float(tau), mean, err, "monte-carlo", label))
    return records


def run_ho_position(config: ExperimentConfig) -> list[CurveRecord]:
    """Conditional position variance of a monitored oscillator against omega t."""
    cfg = config.resolved()
    hom = HOPositionModel.from_ratio(cfg.r, cfg.mass, cfg.omega, cfg.hbar)
    grid = cfg.grid_points
    records = [
        CurveRecord(float(wt), ho_conditional_x_variance(ho_position_s2(hom, wt / hom.omega)), None, "closed-form", "variance")
        for wt in grid
    ]
    records.append(CurveRecord(float(grid[-1]), ho_steady_state_variance(hom), None, "closed-form", "steady-state"))
    if not cfg.oracle:
        return records
    space = hom.space(cfg.dim)
    try:
        psi0 = coherent_state(cfg.alpha, space)
    except TruncationError as exc:
        raise ConfigurationError(str(exc)) from exc
    Q = space.Q
    total, marks = _checkpoint_steps(grid, 1.0 / hom.omega, cfg.dt)

    def x_var(psi, ln, llr):
        qpsi = Q @ psi
        mean = np.einsum("ij,ij->j", psi.conj(), qpsi).real
        return np.einsum("ij,ij->j", qpsi.conj(), qpsi).real - mean * mean

    init = float(x_var(psi0.normalized()[:, None], None, None)[0])
    vals = {0: np.full(cfg.trajectories, init)}
    pos = sorted({m for m in marks if m > 0})
    if pos:
        stepper = SplitStepper(hom.quadratic_model().lse_model(space), cfg.dt)
        vals.update(_ensemble_checkpoints(stepper, psi0.amplitudes, cfg.seed, cfg.trajectories, total, pos, x_var,
                                          cfg.workers, guided=False))
    for wt, m in zip(grid, marks):
        mean, err = _mean_stderr(vals[m])
        records.append(CurveRecord(float(wt), mean, err, "monte-carlo", "variance"))
    return records


def run_momentum_linear(config: ExperimentConfig) -> list[CurveRecord]:
    """Conditional momentum variance and averaged mean momentum against t."""
    cfg = config.resolved()
    model = LinearPotentialModel(cfg.mass, cfg.force, cfg.k, cfg.hbar)
    g0 = GaussianMomentumState.oscillator_ground(cfg.mass, cfg.omega, cfg.hbar)
    grid = cfg.grid_points
    records = [
        CurveRecord(float(t), conditional_momentum_variance(g0.var_p, model.k, float(t)), None, "closed-form", "variance")
        for t in grid
    ]
    records += [CurveRecord(float(t), g0.mean_p + model.force * float(t), None, "closed-form", "mean") for t in grid]
    if not cfg.oracle:
        return records
    space = make_fock_space(cfg.dim, cfg.hbar, cfg.mass, cfg.omega)
    total, marks = _checkpoint_steps(grid, 1.0, cfg.dt)

    def p_stats(psi, ln, llr):
        # columns: importance-weighted mean, conditional variance
        w = np.exp(2.0 * ln + llr)
        st = np.array([momentum_stats(psi[:, j], space) for j in range(psi.shape[1])])
        return np.column_stack([w * st[:, 0], st[:, 1]])

    psi0 = space.basis(0).amplitudes
    vals = {0: np.tile(np.array(momentum_stats(psi0, space)), (cfg.trajectories, 1))}
    pos = sorted({m for m in marks if m > 0})
    if pos:
        stepper = SplitStepper(model.lse_model(space), cfg.dt)
        vals.update(_ensemble_checkpoints(stepper, psi0, cfg.seed, cfg.trajectories, total, pos, p_stats,
                                          cfg.workers, guided=True))
    for t, m in zip(grid, marks):
        mean, err = _mean_stderr(vals[m][:, 1])
        records.append(CurveRecord(float(t), mean, err, "monte-carlo", "variance"))
    for t, m in zip(grid, marks):
        mean, err = _mean_stderr(vals[m][:, 0])
        records.append(CurveRecord(float(t), mean, err, "monte-carlo", "mean"))
    return records


RUNNERS: dict[str, Callable[[ExperimentConfig], list[CurveRecord]]] = {
    "fig1-qnd": run_fig1,
    "ho-position": run_ho_position,
    "momentum-linear": run_momentum_linear,
}
