"""
exgrad
====================
An extragradient solver for common solutions of variational inequalities,
generalized equilibrium problems and fixed-point problems in smooth,
2-uniformly convex spaces.

Usage:
------
>>> import exgrad as xg
"""
import warnings

import jax

jax.config.update("jax_enable_x64", True)

from .version import __version__
from .space import (
    SpaceDescriptor, SpaceKind, Point, DualPoint,
    norm, dual_norm, pairing, duality_map, duality_map_inverse,
    lyapunov, v_functional
)
from .sets import (
    FeasibleSet, Box, Halfspace, WholeSpace,
    contains, metric_projection, generalized_projection, projection_residual
)
from .operators import (
    MonotoneOperator, FixedPointMap,
    apply_operator, apply_map, estimate_alpha,
    check_relatively_nonexpansive, check_norm_domination
)
from .equilibrium import (
    Bifunction, ResolventQuery, ResolventReport,
    resolvent_quadratic_1d, resolvent_solve, verify_resolvent,
    compute_resolvent, check_bifunction_axioms
)
from .solvers import (
    ParametricSequence, Schedule, ProblemInstance,
    IterationRecord, SolveResult, SolveStatus,
    validate_schedule, step, solve, solve_corollary, solve_korpelevich
)
from .harness import (
    ExperimentSpec, RateEstimate,
    load_experiment, load_preset, run, run_many, reproduce, estimate_rate, check
)
from .math_utils import (
    CheckResult, ConvergenceError, ResolventError, MapRangeError,
    ScheduleError, ExperimentError, RateEstimationError
)

__all__ = [
    "SpaceDescriptor", "SpaceKind", "Point", "DualPoint",
    "norm", "dual_norm", "pairing", "duality_map", "duality_map_inverse",
    "lyapunov", "v_functional",
    "FeasibleSet", "Box", "Halfspace", "WholeSpace",
    "contains", "metric_projection", "generalized_projection", "projection_residual",
    "MonotoneOperator", "FixedPointMap",
    "apply_operator", "apply_map", "estimate_alpha",
    "check_relatively_nonexpansive", "check_norm_domination",
    "Bifunction", "ResolventQuery", "ResolventReport",
    "resolvent_quadratic_1d", "resolvent_solve", "verify_resolvent",
    "compute_resolvent", "check_bifunction_axioms",
    "ParametricSequence", "Schedule", "ProblemInstance",
    "IterationRecord", "SolveResult", "SolveStatus",
    "validate_schedule", "step", "solve", "solve_corollary", "solve_korpelevich",
    "ExperimentSpec", "RateEstimate",
    "load_experiment", "load_preset", "run", "run_many", "reproduce", "estimate_rate", "check",
    "CheckResult", "ConvergenceError", "ResolventError", "MapRangeError",
    "ScheduleError", "ExperimentError", "RateEstimationError"
]

_internal_modules = {"config", "math_utils", "version"}


def __getattr__(name):
    if name in _internal_modules:
        warnings.warn(f"Module 'exgrad.{name}' is for internal use only and should not be imported.", UserWarning)
        return None
    raise AttributeError(f"module 'exgrad' has no attribute '{name}'")
