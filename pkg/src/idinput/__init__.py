"""Informative input design for linear system identification.

Identify x_{t+1} = A x_t + B u_t + v_t from data, reduce high-dimensional
systems with DMDc, and plan future inputs that shrink the estimate
covariance (A-optimal design) under box, slew, and state constraints,
benchmarked against random, PRBS, and orthogonal multisine excitation.
"""

from .core import (
    DataMatrices,
    ModelEstimate,
    Trajectory,
    UncertaintyTrajectory,
    assemble_data,
    cov_theta_trace,
    estimate_noise_scale,
    estimate_theta,
    propagate_uncertainty,
    rmse,
    verify_kronecker_identity,
)
from .dmdc import ReducedModel, choose_ranks, lift_state, project_state, reduce, reduce_data
from .planner import (
    PlanProblem,
    PlanResult,
    ccp,
    condense_dynamics,
    linearize_W,
    solve_subproblem_lp,
    solve_subproblem_sdp,
)
from .baselines import SignalSpec, derive_du_max, multisine, prbs, random_inputs, score_signal
from .harness import (
    Constraints,
    EpochLog,
    Plant,
    RunRecord,
    benchmark,
    make_highdim_plant,
    make_random_plant,
    run_experiment,
    simulate_plant,
)
from .config import ExperimentConfig, parse_config

__all__ = [
    "DataMatrices",
    "ModelEstimate",
    "Trajectory",
    "UncertaintyTrajectory",
    "assemble_data",
    "cov_theta_trace",
    "estimate_noise_scale",
    "estimate_theta",
    "propagate_uncertainty",
    "rmse",
    "verify_kronecker_identity",
    "ReducedModel",
    "choose_ranks",
    "lift_state",
    "project_state",
    "reduce",
    "reduce_data",
    "PlanProblem",
    "PlanResult",
    "ccp",
    "condense_dynamics",
    "linearize_W",
    "solve_subproblem_lp",
    "solve_subproblem_sdp",
    "SignalSpec",
    "derive_du_max",
    "multisine",
    "prbs",
    "random_inputs",
    "score_signal",
    "Constraints",
    "EpochLog",
    "Plant",
    "RunRecord",
    "benchmark",
    "make_highdim_plant",
    "make_random_plant",
    "run_experiment",
    "simulate_plant",
    "ExperimentConfig",
    "parse_config",
]

__version__ = "0.1.0"
