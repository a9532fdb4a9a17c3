"""
Default tolerances, budgets and seeds shared by the whole package.

Every public function that takes a tolerance accepts ``None`` to mean the value
defined here.
"""
import os

GEOMETRY_TOL = 1e-9
""" Relative tolerance of the geometric identities (duality map, Lyapunov functional). """
SET_TOL = 1e-9
""" Constraint violation accepted by membership tests. """

PROJECTION_TOL = 1e-10
PROJECTION_MAX_ITER = 10_000
ARMIJO_CONSTANT = 1e-4

RESOLVENT_BISECTION_TOL = 1e-12
RESOLVENT_FIXED_POINT_TOL = 1e-10
RESOLVENT_MAX_ITER = 10_000
RESOLVENT_VERIFY_TOL = 1e-6
RESOLVENT_VERIFY_SAMPLES = 100

STOP_TOL = 1e-12
MAX_ITERS = 1000

CHECK_TOL = 1e-9
CHECK_SAMPLES = 200

SAMPLE_RADIUS = 10.0
""" Half-width of the sampling window along unbounded coordinates. """

SEED_ENV_VAR = "EXGRAD_SEED"
DEFAULT_SEED = 42


def sampling_seed() -> int:
    """
    Seed of every randomized sampler, taken from ``EXGRAD_SEED`` when set.
    """
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f'{SEED_ENV_VAR} must be an integer, got {raw!r}') from None


def resolve(value, default):
    """ Return ``value`` unless it is ``None``. """
    return default if value is None else value
