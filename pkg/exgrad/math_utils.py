import logging
from collections import namedtuple
from functools import lru_cache
from typing import Optional, Tuple

import jax
import jax.numpy as jnp
from scipy.stats import qmc

from . import config

logger = logging.getLogger(__name__)

"""
Outcome of one sampled hypothesis check. ``status`` is one of ``pass``, ``warn``, ``fail``,
``assumed`` or ``skipped``; ``margin`` is the worst slack found (negative when violated) and
``witness`` the sample that produced it.
"""
CheckResult = namedtuple('CheckResult', ['name', 'status', 'margin', 'witness', 'detail'])

PASS, WARN, FAIL, ASSUMED, SKIPPED = 'pass', 'warn', 'fail', 'assumed', 'skipped'


class ConvergenceError(RuntimeError):
    """ An inner iteration ran out of budget. Keeps the best iterate and its residual. """

    def __init__(self, message: str, best=None, residual: float = float('nan')):
        super().__init__(message)
        self.best = best
        self.residual = residual


class ResolventError(RuntimeError):
    """ A resolvent candidate violates the defining inequality. """

    def __init__(self, message: str, violation: float = float('nan'), witness=None):
        super().__init__(message)
        self.violation = violation
        self.witness = witness


class MapRangeError(ValueError):
    """ A map declared C -> C produced a point outside C. """

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class ScheduleError(ValueError):
    """ A hard convergence condition on the parameter schedule failed. """

    def __init__(self, message: str, condition: str, diagnostics=None):
        super().__init__(message)
        self.condition = condition
        self.diagnostics = diagnostics


class ExperimentError(ValueError):
    """ An experiment file could not be parsed or validated. """

    def __init__(self, message: str, path: str = None, line: int = None, column: int = None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.column = column


class RateEstimationError(ValueError):
    pass


def validate_matrix_shape(
        matrix: jnp.ndarray,
        shape: Tuple[int, ...],
        name: str
):
    """
    Raises if ``matrix`` does not have shape ``shape``. The error message will contain ``name``.
    """
    if matrix.shape != shape:
        raise ValueError(f'Dimensions of `{name}` {matrix.shape} are inconsistent. Expected {shape}.')


def validate_vector_shape(
        vector: jnp.ndarray,
        dim: int,
        name: str
):
    """
    Raises if ``vector`` is not a flat vector of length ``dim``.
    """
    validate_matrix_shape(vector, (dim,), name)


def is_symmetric(matrix: jnp.ndarray, atol: float = 1e-12) -> bool:
    """Check if the input matrix is symmetric."""
    return bool(jnp.allclose(matrix, matrix.T, atol=atol))


def sampling_window(
        lower: jnp.ndarray,
        upper: jnp.ndarray,
        radius: Optional[float] = None
) -> Tuple[jnp.ndarray, jnp.ndarray]:
    """
    Replace infinite bounds by a finite window of half-width ``radius`` so that
    points can be drawn from unbounded coordinates.
    """
    radius = config.resolve(radius, config.SAMPLE_RADIUS)
    lo = jnp.where(jnp.isfinite(lower), lower, jnp.where(jnp.isfinite(upper), upper - 2 * radius, -radius))
    hi = jnp.where(jnp.isfinite(upper), upper, jnp.where(jnp.isfinite(lower), lower + 2 * radius, radius))
    return lo, hi


@lru_cache(maxsize=64)
def _unit_halton(n: int, dim: int):
    return qmc.Halton(d=dim, scramble=False).random(n + 1)[1:]


def halton_points(
        n: int,
        lower: jnp.ndarray,
        upper: jnp.ndarray
) -> jnp.ndarray:
    """
    Deterministic low-discrepancy points in the box ``[lower, upper]``, shape ``(n, dim)``.
    The sequence is unscrambled, so two calls always return the same points.
    """
    lo, hi = sampling_window(lower, upper)
    return lo + (hi - lo) * jnp.asarray(_unit_halton(n, lo.shape[0]))


def uniform_points(
        key: jax.Array,
        n: int,
        lower: jnp.ndarray,
        upper: jnp.ndarray
) -> jnp.ndarray:
    """ Seeded uniform points in the box ``[lower, upper]``, shape ``(n, dim)``. """
    lo, hi = sampling_window(lower, upper)
    return jax.random.uniform(key, (n, lo.shape[0]), minval=lo, maxval=hi)


def seeded_key(offset: int = 0) -> jax.Array:
    """ PRNG key from the configured sampling seed. """
    return jax.random.PRNGKey(config.sampling_seed() + offset)


def format_vector(vector) -> str:
    """ Semicolon-joined decimals with 17 significant digits. """
    return ';'.join(f'{float(v):.17g}' for v in jnp.ravel(jnp.asarray(vector)))


def parse_vector(text: str) -> jnp.ndarray:
    """ Inverse of ``format_vector``; also accepts comma separators. """
    parts = [part for part in str(text).replace(',', ';').split(';') if part.strip()]
    if not parts:
        raise ValueError(f'Cannot parse an empty vector from {text!r}')
    return jnp.array([float(part) for part in parts])
