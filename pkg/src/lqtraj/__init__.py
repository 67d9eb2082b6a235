"""Linear quantum trajectories: closed-form solutions and brute-force oracles."""

from __future__ import annotations

from .coherent import (
    DisentangledQuadratic,
    GaussianWavefunction,
    LinearExponential,
    disentangle_quadratic,
    quadratic_exponential_on_coherent,
)
from .errors import (
    ArgumentError,
    ConfigurationError,
    DegenerateStateError,
    InvalidDimensionError,
    InvalidStateError,
    LqtrajError,
    NumericalError,
    SingularDisentanglingError,
    TruncationError,
    UnsupportedStateError,
)
from .experiments import CurveRecord, ExperimentConfig, parse_grid
from .hilbert import DensityMatrix, FockSpace, StateVector, coherent_state, fidelity, thermal_state
from .momentum import GaussianMomentumState, LinearPotentialModel, propagate_gaussian
from .oracle import LseModel, MasterModel, integrate_lse, integrate_master, sample_guided
from .paths import WienerPath, sample_path, wy_functionals
from .qnd import QndModel, average_conditional_uncertainty, qnd_weights
from .quadratic import HOPositionModel, QuadraticModel, coefficient_functions, evolve_state

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "ConfigurationError",
    "CurveRecord",
    "DegenerateStateError",
    "DensityMatrix",
    "DisentangledQuadratic",
    "ExperimentConfig",
    "FockSpace",
    "GaussianMomentumState",
    "GaussianWavefunction",
    "HOPositionModel",
    "InvalidDimensionError",
    "InvalidStateError",
    "LinearExponential",
    "LinearPotentialModel",
    "LqtrajError",
    "LseModel",
    "MasterModel",
    "NumericalError",
    "QndModel",
    "QuadraticModel",
    "SingularDisentanglingError",
    "StateVector",
    "TruncationError",
    "UnsupportedStateError",
    "WienerPath",
    "average_conditional_uncertainty",
    "coefficient_functions",
    "coherent_state",
    "disentangle_quadratic",
    "evolve_state",
    "fidelity",
    "integrate_lse",
    "integrate_master",
    "parse_grid",
    "propagate_gaussian",
    "qnd_weights",
    "quadratic_exponential_on_coherent",
    "sample_guided",
    "sample_path",
    "thermal_state",
    "wy_functionals",
]
