"""Simulation of the height process of quadratic branching processes.

Reflected Brownian paths with drift, their projections onto lower
barriers, local-time (Ray-Knight) fields of paths stopped at a given local
time at 0, Poisson-mark pruning, and the statistical checks that compare
all of these with closed-form branching-process predictions.
"""
from .csbp import (BranchingParams, CsbpPath, csbp_path, csbp_transition_sample,
                   extinction_probability, psi, u_closed, u_ode)
from .experiments import ExperimentConfig, run_experiment
from .heightfield import LocalTimeField, girsanov_check, occupation_integral, ray_knight_field
from .pathops import MaxStepsExceeded, project, stop_at_local_time, time_below
from .pruning import MarkedPath, mark_replay, prune, prune_stopped
from .reflected_bm import (GridPath, ReflectedBmConfig, band_local_time, boundary_local_time,
                           simulate_reflected, stationary_density)
from .report import ExperimentReport
from .stats import TestResult, ks_test, laplace_compare

__version__ = "0.1.0"

__all__ = [
    "BranchingParams", "CsbpPath", "csbp_path", "csbp_transition_sample",
    "extinction_probability", "psi", "u_closed", "u_ode",
    "ExperimentConfig", "run_experiment", "ExperimentReport",
    "LocalTimeField", "girsanov_check", "occupation_integral", "ray_knight_field",
    "MaxStepsExceeded", "project", "stop_at_local_time", "time_below",
    "MarkedPath", "mark_replay", "prune", "prune_stopped",
    "GridPath", "ReflectedBmConfig", "band_local_time", "boundary_local_time",
    "simulate_reflected", "stationary_density",
    "TestResult", "ks_test", "laplace_compare",
]
