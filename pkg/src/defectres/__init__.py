"""Defect bound states and truncation-induced resonances of periodic Schrodinger operators."""

from .errors import ConfigError, NonConvergenceError, PreconditionError, StepSizeUnderflow
from .potential import DefectPotential, PeriodicPotential, Potential, scalar_evaluator
from .ode import (
    JointState,
    StateVector,
    TransferMatrix,
    VariationalState,
    integrate,
    integrate_joint,
    integrate_variational,
    transfer_matrix,
    wronskian,
)
from .floquet import (
    BandGapReport,
    BandInterval,
    BlochFactors,
    FloquetData,
    band_gap_scan,
    bloch_factors,
    monodromy,
)
from .defect import DefectMode, ProfileResult, find_defect_modes, matching_function, profile
from .resonance import (
    ResonanceResult,
    ResonantState,
    SqrtBranch,
    ThetaEval,
    asymptotic_general,
    asymptotic_parity,
    resonant_state,
    solve_bound_negative,
    solve_edge,
    solve_general,
    solve_parity,
    theta,
    theta_pm,
)
from .cli import RunConfig, SweepSummary, fit_rate, load_config, run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NonConvergenceError",
    "PreconditionError",
    "StepSizeUnderflow",
    "DefectPotential",
    "PeriodicPotential",
    "Potential",
    "scalar_evaluator",
    "StateVector",
    "TransferMatrix",
    "VariationalState",
    "integrate",
    "integrate_joint",
    "JointState",
    "integrate_variational",
    "transfer_matrix",
    "wronskian",
    "BandGapReport",
    "BandInterval",
    "BlochFactors",
    "FloquetData",
    "band_gap_scan",
    "bloch_factors",
    "monodromy",
    "DefectMode",
    "ProfileResult",
    "find_defect_modes",
    "matching_function",
    "profile",
    "ResonanceResult",
    "ResonantState",
    "SqrtBranch",
    "ThetaEval",
    "asymptotic_general",
    "asymptotic_parity",
    "resonant_state",
    "solve_bound_negative",
    "solve_edge",
    "solve_general",
    "solve_parity",
    "theta",
    "theta_pm",
    "RunConfig",
    "SweepSummary",
    "fit_rate",
    "load_config",
    "run",
]
