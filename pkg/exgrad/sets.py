r"""
Closed convex feasible sets.

Each set supports a membership test, the euclidean (metric) projection
:math:`P_C` and the generalized projection

.. math::
    \Pi_C x = \operatorname{argmin}_{y \in C} \phi(y, x),

which coincides with :math:`P_C` in euclidean spaces. In :math:`\ell_p` spaces it is
computed by projected gradient descent on
:math:`h(y) = \|y\|^2 - 2 \langle J x, y \rangle` (gradient :math:`2 (J y - J x)`),
feasible at every iterate.
"""
import abc
import itertools
import logging
from functools import partial
from typing import Optional, Tuple

import jax
import jax.numpy as jnp
from jax import lax

from . import config
from .math_utils import ConvergenceError, halton_points, uniform_points, validate_vector_shape
from .space import DualPoint, Point, _expect, duality_coords, lp_duality, lp_norm

logger = logging.getLogger(__name__)


class FeasibleSet(abc.ABC):
    """
    Base class of the nonempty closed convex sets the solvers work on.
    """
    variant = None

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 1:
            raise ValueError(f'Set dimension must be a positive integer, got {dim}')
        self.dim = int(dim)

    @abc.abstractmethod
    def violation(self, coords: jnp.ndarray) -> jnp.ndarray:
        """ Largest constraint violation of ``coords`` (zero inside the set). """

    @abc.abstractmethod
    def project_coords(self, coords: jnp.ndarray) -> jnp.ndarray:
        """ Euclidean nearest point of the set. """

    @abc.abstractmethod
    def bounding_box(self) -> Tuple[jnp.ndarray, jnp.ndarray]:
        """ Coordinate bounds used to draw sample points (may be infinite). """

    @abc.abstractmethod
    def kernel_args(self) -> Tuple[jnp.ndarray, jnp.ndarray]:
        """ Arrays describing the set to the jitted projected-gradient kernel. """

    @abc.abstractmethod
    def interval(self) -> Tuple[float, float]:
        """ The set as an interval ``(lo, hi)``; one-dimensional sets only. """

    @abc.abstractmethod
    def to_dict(self) -> dict:
        pass

    def corners(self) -> jnp.ndarray:
        """ Finite vertices of the set, shape ``(m, dim)``; empty when there are none. """
        return jnp.zeros((0, self.dim))

    def sample(self, n: int, key: Optional[jax.Array] = None) -> jnp.ndarray:
        """
        ``n`` points of the set, shape ``(n, dim)``. Without a key the points are the
        deterministic Halton set of the bounding box; with a key they are seeded uniform
        draws. Points are mapped into the set by the euclidean projection.
        """
        lower, upper = self.bounding_box()
        if key is None:
            points = halton_points(n, lower, upper)
        else:
            points = uniform_points(key, n, lower, upper)
        return jax.vmap(self.project_coords)(points)

    def _check_dim(self, x):
        if x.space.dim != self.dim:
            raise ValueError(f'Dimension mismatch: set has dimension {self.dim}, point has {x.space.dim}')

    @staticmethod
    def from_dict(data: dict, dim: int) -> 'FeasibleSet':
        """
        Build a set from ``{"type": "box", "lower": [...], "upper": [...]}``,
        ``{"type": "halfspace", "normal": [...], "offset": s}`` or ``{"type": "whole"}``.
        Missing or ``null`` box bounds are infinite.
        """
        kind = data.get('type')
        if kind == 'box':
            return Box(_bounds(data.get('lower'), dim, -jnp.inf), _bounds(data.get('upper'), dim, jnp.inf))
        if kind == 'halfspace':
            return Halfspace(jnp.asarray(data['normal'], dtype=jnp.float64), float(data['offset']))
        if kind == 'whole':
            return WholeSpace(dim)
        raise ValueError(f'Unknown set type {kind!r}')


def _bounds(value, dim: int, default: float) -> jnp.ndarray:
    if value is None:
        return jnp.full(dim, default)
    if isinstance(value, (int, float, str)):
        value = [value] * dim
    return jnp.array([default if v is None else float(v) for v in value])


class Box(FeasibleSet):
    """
    Coordinatewise bounds ``lower <= x <= upper``; bounds may be infinite.
    """
    variant = 'box'

    def __init__(self, lower, upper):
        lower = jnp.atleast_1d(jnp.asarray(lower, dtype=jnp.float64))
        upper = jnp.atleast_1d(jnp.asarray(upper, dtype=jnp.float64))
        super().__init__(lower.shape[0])
        validate_vector_shape(upper, self.dim, 'upper')
        if bool(jnp.any(jnp.isnan(lower))) or bool(jnp.any(jnp.isnan(upper))):
            raise ValueError('Box bounds cannot be NaN')
        if bool(jnp.any(lower > upper)):
            raise ValueError(f'Empty box: lower {lower} exceeds upper {upper}')
        self.lower = lower
        self.upper = upper

    def violation(self, coords):
        return jnp.maximum(jnp.max(jnp.maximum(self.lower - coords, coords - self.upper)), 0.0)

    def project_coords(self, coords):
        return jnp.clip(coords, self.lower, self.upper)

    def bounding_box(self):
        return self.lower, self.upper

    def kernel_args(self):
        return self.lower, self.upper

    def interval(self):
        if self.dim != 1:
            raise ValueError(f'Only one-dimensional sets are intervals, got dimension {self.dim}')
        return float(self.lower[0]), float(self.upper[0])

    def corners(self):
        if not (bool(jnp.all(jnp.isfinite(self.lower))) and bool(jnp.all(jnp.isfinite(self.upper)))):
            return jnp.zeros((0, self.dim))
        pairs = [(float(lo), float(hi)) for lo, hi in zip(self.lower, self.upper)]
        return jnp.array(list(itertools.product(*pairs)))

    def to_dict(self):
        return {
            'type': 'box',
            'lower': [float(v) if jnp.isfinite(v) else None for v in self.lower],
            'upper': [float(v) if jnp.isfinite(v) else None for v in self.upper],
        }

    def __repr__(self):
        return f'Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})'


class Halfspace(FeasibleSet):
    """
    The halfspace :math:`\\{x : \\langle a, x \\rangle \\le b\\}` with a nonzero dual normal ``a``.
    """
    variant = 'halfspace'

    def __init__(self, normal, offset: float):
        if isinstance(normal, DualPoint):
            normal = normal.coords
        normal = jnp.atleast_1d(jnp.asarray(normal, dtype=jnp.float64))
        super().__init__(normal.shape[0])
        if not bool(jnp.any(normal != 0)):
            raise ValueError('Halfspace normal must be nonzero')
        self.normal = normal
        self.offset = float(offset)

    def violation(self, coords):
        return jnp.maximum(jnp.dot(self.normal, coords) - self.offset, 0.0)

    def project_coords(self, coords):
        return _halfspace_projection(coords, self.normal, self.offset)

    def bounding_box(self):
        return jnp.full(self.dim, -jnp.inf), jnp.full(self.dim, jnp.inf)

    def kernel_args(self):
        return self.normal, jnp.asarray(self.offset)

    def interval(self):
        if self.dim != 1:
            raise ValueError(f'Only one-dimensional sets are intervals, got dimension {self.dim}')
        bound = self.offset / float(self.normal[0])
        return (-jnp.inf, bound) if self.normal[0] > 0 else (bound, jnp.inf)

    def to_dict(self):
        return {'type': 'halfspace', 'normal': self.normal.tolist(), 'offset': self.offset}

    def __repr__(self):
        return f'Halfspace(normal={self.normal.tolist()}, offset={self.offset})'


class WholeSpace(FeasibleSet):
    """ The unconstrained set E. """
    variant = 'whole'

    def violation(self, coords):
        return jnp.asarray(0.0)

    def project_coords(self, coords):
        return coords

    def bounding_box(self):
        return jnp.full(self.dim, -jnp.inf), jnp.full(self.dim, jnp.inf)

    def kernel_args(self):
        raise NotImplementedError('The whole space needs no projection kernel')

    def interval(self):
        if self.dim != 1:
            raise ValueError(f'Only one-dimensional sets are intervals, got dimension {self.dim}')
        return -jnp.inf, jnp.inf

    def to_dict(self):
        return {'type': 'whole'}

    def __repr__(self):
        return f'WholeSpace(dim={self.dim})'


def _box_projection(y, lower, upper):
    return jnp.clip(y, lower, upper)


def _halfspace_projection(y, normal, offset):
    return y - jnp.maximum(jnp.dot(normal, y) - offset, 0.0) / jnp.dot(normal, normal) * normal


_PROJECTORS = {'box': _box_projection, 'halfspace': _halfspace_projection}


@partial(jax.jit, static_argnames=('variant',))
def _projected_gradient(jx, y0, a, b, p, tol, max_iter, variant):
    """
    Minimize :math:`\\|y\\|_p^2 - 2 \\langle J x, y \\rangle` over the set described by
    ``(a, b)``. Barzilai-Borwein trial steps, Armijo backtracking by halving.
    Returns the final iterate, its projected-gradient residual and the iteration count.
    """
    project = _PROJECTORS[variant]
    slack = 64.0 * jnp.finfo(jnp.float64).eps

    def objective(y):
        return lp_norm(y, p) ** 2 - 2.0 * jnp.dot(jx, y)

    def gradient(y):
        return 2.0 * (lp_duality(y, p) - jx)

    def residual(y, g):
        return jnp.linalg.norm(y - project(y - g, a, b))

    def line_search(y, fy, g, t0):
        def cond(state):
            _, cand, fc, tries = state
            bound = fy + config.ARMIJO_CONSTANT * jnp.dot(g, cand - y) + slack * (1.0 + jnp.abs(fy))
            return (fc > bound) & (tries < 60)

        def body(state):
            t, _, _, tries = state
            t = 0.5 * t
            cand = project(y - t * g, a, b)
            return t, cand, objective(cand), tries + 1

        cand = project(y - t0 * g, a, b)
        return lax.while_loop(cond, body, (t0, cand, objective(cand), jnp.asarray(0)))

    def cond(state):
        k, _, _, _, _, res, _, _ = state
        return (k < max_iter) & (res > tol)

    def body(state):
        k, y, g, fy, t_prev, _, y_prev, g_prev = state
        s, dg = y - y_prev, g - g_prev
        curvature = jnp.dot(s, dg)
        t0 = jnp.clip(jnp.where(curvature > 0, jnp.dot(s, s) / curvature, t_prev), 1e-10, 1e10)
        t, cand, fc, _ = line_search(y, fy, g, t0)
        g_new = gradient(cand)
        return k + 1, cand, g_new, fc, t, residual(cand, g_new), y, g

    g0 = gradient(y0)
    state = (jnp.asarray(0), y0, g0, objective(y0), jnp.asarray(1.0), residual(y0, g0), y0, g0)
    k, y, _, _, _, res, _, _ = lax.while_loop(cond, body, state)
    return y, res, k


def contains(set: FeasibleSet, x: Point, tol: Optional[float] = None) -> bool:
    """ True iff ``x`` violates no constraint of ``set`` by more than ``tol``. """
    _expect(x, Point, 'x')
    set._check_dim(x)
    tol = config.resolve(tol, config.SET_TOL)
    if tol < 0:
        raise ValueError(f'Tolerance must be nonnegative, got {tol}')
    return bool(set.violation(x.coords) <= tol)


def metric_projection(set: FeasibleSet, x: Point) -> Point:
    """
    Euclidean least-distance projection :math:`P_C x`: clamp for boxes, closed-form
    orthogonal drop for halfspaces, identity for the whole space.
    """
    _expect(x, Point, 'x')
    set._check_dim(x)
    if not x.space.is_euclidean:
        raise ValueError('metric_projection needs a euclidean space; use generalized_projection')
    return Point(set.project_coords(x.coords), x.space)


def generalized_projection_with_residual(
        set: FeasibleSet,
        x: Point,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None
) -> Tuple[Point, float]:
    """
    :func:`generalized_projection` that also returns the projected-gradient residual of
    the inner minimizer (zero on the exact paths).
    """
    _expect(x, Point, 'x')
    set._check_dim(x)
    tol = config.resolve(tol, config.PROJECTION_TOL)
    max_iter = config.resolve(max_iter, config.PROJECTION_MAX_ITER)
    if tol <= 0:
        raise ValueError(f'Projection tolerance must be positive, got {tol}')
    space = x.space
    if space.is_euclidean or set.dim == 1 or isinstance(set, WholeSpace):
        return Point(set.project_coords(x.coords), space), 0.0
    if bool(set.violation(x.coords) <= 0.0):
        return x, 0.0

    a, b = set.kernel_args()
    jx = duality_coords(x.coords, space)
    y, res, iterations = _projected_gradient(
        jx, set.project_coords(x.coords), a, b, space.p, tol, max_iter, variant=set.variant)
    res = float(res)
    logger.debug(f'generalized projection: {int(iterations)} iterations, residual {res:.3e}')
    if not res <= tol:
        raise ConvergenceError(
            f'Generalized projection did not reach tolerance {tol} in {max_iter} iterations '
            f'(residual {res:.3e})', best=Point(y, space), residual=res)
    return Point(y, space), res


def generalized_projection(
        set: FeasibleSet,
        x: Point,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None
) -> Point:
    r"""
    Generalized projection :math:`\Pi_C x`, the minimizer of :math:`\phi(\cdot, x)` over the set.

    Exact paths: euclidean spaces (identical to :func:`metric_projection`), one-dimensional
    sets (clamping, since :math:`J` is increasing on :math:`\mathbb{R}`), the whole space
    (identity) and points already in the set. Otherwise projected gradient descent is run
    from the euclidean projection of ``x`` until the projected-gradient norm is below
    ``tol``; running out of ``max_iter`` raises :class:`ConvergenceError` with the best
    iterate.
    """
    return generalized_projection_with_residual(set, x, tol, max_iter)[0]


def projection_residual(
        set: FeasibleSet,
        x: Point,
        z: Point,
        samples: int = 500
) -> float:
    r"""
    Certificate of :math:`z = \Pi_C x`: the largest value of
    :math:`\langle J x - J z, y - z \rangle` over ``samples`` deterministic points
    :math:`y \in C` plus the vertices of the set, clipped below at zero.
    """
    _expect(x, Point, 'x')
    _expect(z, Point, 'z')
    set._check_dim(x)
    set._check_dim(z)
    if not contains(set, z):
        raise ValueError(f'{z} is not a point of the set')
    points = jnp.concatenate([set.sample(samples), set.corners()], axis=0)
    direction = duality_coords(x.coords, x.space) - duality_coords(z.coords, z.space)
    values = (points - z.coords) @ direction
    return float(jnp.maximum(jnp.max(values), 0.0))
