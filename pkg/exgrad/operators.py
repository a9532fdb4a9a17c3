r"""
Monotone operators :math:`A : E \to E^*` and fixed-point mappings :math:`T : C \to C`,
with the sampled checks of the hypotheses the extragradient scheme relies on.

An operator is :math:`\alpha`-inverse-strongly monotone when

.. math::
    \langle A x - A y, x - y \rangle \ge \alpha \|A x - A y\|_*^2 .

A map is relatively nonexpansive when :math:`\phi(p, T x) \le \phi(p, x)` for all
:math:`x \in C` and every fixed point :math:`p`, and its asymptotic fixed points are
ordinary ones. Only the first half can be checked on samples.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import jax
import jax.numpy as jnp

from . import config
from .math_utils import (
    ASSUMED,
    FAIL,
    PASS,
    CheckResult,
    MapRangeError,
    is_symmetric,
    validate_matrix_shape,
    validate_vector_shape,
)
from .sets import FeasibleSet, contains
from .space import DualPoint, Point, SpaceDescriptor, _expect, dual_norm_coords, dual_norm_sq_coords, lyapunov_coords

logger = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    IDENTITY = 'identity'
    LINEAR = 'linear'
    SCALAR_AFFINE = 'scalar_affine'
    ZERO = 'zero'


class MapKind(str, Enum):
    IDENTITY = 'identity'
    SCALING = 'scaling'
    CUSTOM = 'custom'


def _require_euclidean(space: SpaceDescriptor, what: str):
    if not space.is_euclidean:
        raise ValueError(f'The {what} operator needs a euclidean space, got {space.kind.value}')


@dataclass(frozen=True, eq=False)
class MonotoneOperator:
    """
    A monotone operator with its declared inverse-strong-monotonicity constant.

    Args:
        - kind: identity, linear, scalar_affine or zero.
        - space: the space the operator acts on.
        - alpha: declared constant; 1 for the identity, :math:`1/\\lambda_{max}(M)` by
          default for a linear operator, :math:`1/m` for a scalar affine one.
        - matrix: symmetric positive semidefinite matrix of a linear operator.
        - m, q: slope and offset of ``A x = m x + q``.
    """
    kind: OperatorKind
    space: SpaceDescriptor
    alpha: float
    matrix: Optional[jnp.ndarray] = None
    m: float = 0.0
    q: Optional[jnp.ndarray] = None

    @classmethod
    def identity(cls, space: SpaceDescriptor) -> 'MonotoneOperator':
        _require_euclidean(space, 'identity')
        return cls(OperatorKind.IDENTITY, space, 1.0)

    @classmethod
    def linear(cls, space: SpaceDescriptor, matrix, alpha: Optional[float] = None) -> 'MonotoneOperator':
        _require_euclidean(space, 'linear')
        matrix = jnp.asarray(matrix, dtype=jnp.float64)
        validate_matrix_shape(matrix, (space.dim, space.dim), 'matrix')
        if not is_symmetric(matrix):
            raise ValueError('A linear monotone operator needs a symmetric matrix')
        eigenvalues = jnp.linalg.eigvalsh(matrix)
        top = float(eigenvalues[-1])
        if top <= 0.0:
            raise ValueError('A linear operator needs a positive largest eigenvalue')
        if float(eigenvalues[0]) < -1e-12 * top:
            raise ValueError(f'Matrix is not positive semidefinite (smallest eigenvalue {float(eigenvalues[0])})')
        bound = 1.0 / top
        if alpha is None:
            alpha = bound
        elif alpha > bound * (1.0 + 1e-12):
            logger.warning(f'Declared alpha {alpha} exceeds 1/lambda_max = {bound}')
        return cls(OperatorKind.LINEAR, space, float(alpha), matrix=matrix)

    @classmethod
    def scalar_affine(cls, space: SpaceDescriptor, m: float, q=0.0, alpha: Optional[float] = None) -> 'MonotoneOperator':
        _require_euclidean(space, 'scalar_affine')
        if m < 0:
            raise ValueError(f'A monotone scalar affine operator needs m >= 0, got {m}')
        q = jnp.broadcast_to(jnp.asarray(q, dtype=jnp.float64), (space.dim,))
        if alpha is None:
            alpha = 1.0 / m if m > 0 else 1.0
        return cls(OperatorKind.SCALAR_AFFINE, space, float(alpha), m=float(m), q=q)

    @classmethod
    def zero(cls, space: SpaceDescriptor, alpha: float = 1.0) -> 'MonotoneOperator':
        return cls(OperatorKind.ZERO, space, float(alpha))

    def __post_init__(self):
        object.__setattr__(self, 'kind', OperatorKind(self.kind))
        if not self.alpha > 0:
            raise ValueError(f'alpha must be positive, got {self.alpha}')

    def coords(self, x: jnp.ndarray) -> jnp.ndarray:
        """ Coordinates of ``A x`` in the dual space. """
        if self.kind is OperatorKind.IDENTITY:
            return x
        if self.kind is OperatorKind.LINEAR:
            return self.matrix @ x
        if self.kind is OperatorKind.SCALAR_AFFINE:
            return self.m * x + self.q
        return jnp.zeros_like(x)

    @property
    def multiplier(self) -> Optional[float]:
        """ ``lam`` when the operator is ``lam * I`` on the real line, otherwise ``None``. """
        if self.space.dim != 1:
            return None
        if self.kind is OperatorKind.IDENTITY:
            return 1.0
        if self.kind is OperatorKind.ZERO:
            return 0.0
        if self.kind is OperatorKind.SCALAR_AFFINE and not bool(jnp.any(self.q != 0)):
            return self.m
        if self.kind is OperatorKind.LINEAR:
            return float(self.matrix[0, 0])
        return None

    @classmethod
    def from_dict(cls, data: dict, space: SpaceDescriptor) -> 'MonotoneOperator':
        kind = OperatorKind(data.get('type'))
        if kind is OperatorKind.IDENTITY:
            return cls.identity(space)
        if kind is OperatorKind.LINEAR:
            return cls.linear(space, data['matrix'], data.get('alpha'))
        if kind is OperatorKind.SCALAR_AFFINE:
            return cls.scalar_affine(space, float(data['m']), data.get('q', 0.0), data.get('alpha'))
        return cls.zero(space, float(data.get('alpha', 1.0)))

    def to_dict(self) -> dict:
        data = {'type': self.kind.value}
        if self.kind is OperatorKind.LINEAR:
            data.update(matrix=self.matrix.tolist(), alpha=self.alpha)
        elif self.kind is OperatorKind.SCALAR_AFFINE:
            data.update(m=self.m, q=self.q.tolist())
        elif self.kind is OperatorKind.ZERO:
            data.update(alpha=self.alpha)
        return data


@dataclass(frozen=True, eq=False)
class FixedPointMap:
    """
    A self-map of C with the fixed points it declares.

    ``scaling(t)`` is ``x -> t x`` with ``|t| <= 1`` and fixed point 0. ``custom`` wraps a
    coordinate function ``fn`` together with its ``known_fixed_points``.
    """
    kind: MapKind
    space: SpaceDescriptor
    t: float = 1.0
    fn: Optional[Callable[[jnp.ndarray], jnp.ndarray]] = None
    known_fixed_points: Tuple[Point, ...] = field(default=())

    @classmethod
    def identity(cls, space: SpaceDescriptor) -> 'FixedPointMap':
        return cls(MapKind.IDENTITY, space)

    @classmethod
    def scaling(cls, space: SpaceDescriptor, t: float) -> 'FixedPointMap':
        if abs(t) > 1.0:
            raise ValueError(f'A scaling map needs |t| <= 1, got {t}')
        return cls(MapKind.SCALING, space, float(t), known_fixed_points=(space.zero(),))

    @classmethod
    def custom(cls, space: SpaceDescriptor, fn: Callable, known_fixed_points: List[Point]) -> 'FixedPointMap':
        return cls(MapKind.CUSTOM, space, fn=fn, known_fixed_points=tuple(known_fixed_points))

    def __post_init__(self):
        object.__setattr__(self, 'kind', MapKind(self.kind))
        for p in self.known_fixed_points:
            _expect(p, Point, 'known fixed point')

    def coords(self, x: jnp.ndarray) -> jnp.ndarray:
        if self.kind is MapKind.IDENTITY:
            return x
        if self.kind is MapKind.SCALING:
            return self.t * x
        return self.fn(x)

    def fixed_points(self, C: FeasibleSet, count: int = 20) -> List[Point]:
        """ Declared fixed points; for the identity, ``count`` points of C. """
        if self.kind is MapKind.IDENTITY:
            return [Point(y, self.space) for y in C.sample(count)]
        return list(self.known_fixed_points)

    @classmethod
    def from_dict(cls, data: dict, space: SpaceDescriptor) -> 'FixedPointMap':
        """
        ``{"type": "identity"}`` or ``{"type": "scaling", "t": s}``. A scaling with
        ``|t| > 1`` is kept as a custom map (fixed point 0) so that it can be checked.
        """
        kind = data.get('type')
        if kind == 'identity':
            return cls.identity(space)
        if kind == 'scaling':
            t = float(data['t'])
            if abs(t) > 1.0:
                logger.warning(f'scaling t={t} is outside |t| <= 1; loaded as a custom map')
                return cls(MapKind.CUSTOM, space, t, fn=lambda x: t * x, known_fixed_points=(space.zero(),))
            return cls.scaling(space, t)
        raise ValueError(f'Unknown map type {kind!r}')

    def to_dict(self) -> dict:
        if self.kind is MapKind.IDENTITY:
            return {'type': 'identity'}
        if self.kind is MapKind.SCALING or (self.fn is not None and self.t != 1.0):
            return {'type': 'scaling', 't': self.t}
        raise ValueError('Custom maps have no file form')


def _check_space(obj, x: Point):
    _expect(x, Point, 'x')
    if x.space.dim != obj.space.dim:
        raise ValueError(f'Dimension mismatch: operator acts on dimension {obj.space.dim}, point has {x.space.dim}')


def apply_operator(A: MonotoneOperator, x: Point) -> DualPoint:
    """ Evaluate ``A x``. """
    _check_space(A, x)
    return DualPoint(A.coords(x.coords), x.space)


def apply_map(T: FixedPointMap, x: Point, C: Optional[FeasibleSet] = None) -> Point:
    """
    Evaluate ``T x``. With ``C`` given the image must lie in C, otherwise
    :class:`MapRangeError` is raised.
    """
    _check_space(T, x)
    image = T.coords(x.coords)
    validate_vector_shape(image, x.space.dim, 'T(x)')
    y = Point(image, x.space)
    if C is not None and not contains(C, y):
        raise MapRangeError(f'Map {T.kind.value} sent {x} outside the set: {y}', point=y)
    return y


def estimate_alpha(
        A: MonotoneOperator,
        C: FeasibleSet,
        samples: Optional[int] = None,
        tol: Optional[float] = None
) -> float:
    """
    Empirical infimum of :math:`\\langle Ax - Ay, x - y \\rangle / \\|Ax - Ay\\|_*^2` over all
    pairs of ``samples`` points of C. It is an upper bound on the true constant; returns
    ``inf`` when A is constant on the samples. Logs a warning when the declared ``alpha``
    exceeds the estimate by more than ``tol``.
    """
    samples = config.resolve(samples, config.CHECK_SAMPLES)
    tol = config.resolve(tol, config.CHECK_TOL)
    if samples < 2:
        raise ValueError(f'estimate_alpha needs at least 2 samples, got {samples}')
    points = C.sample(samples)
    images = jax.vmap(A.coords)(points)
    i, j = jnp.triu_indices(samples, k=1)
    d_image = images[i] - images[j]
    d_point = points[i] - points[j]
    inner = jnp.einsum('ni,ni->n', d_image, d_point)
    if A.space.is_euclidean:
        denom = jnp.einsum('ni,ni->n', d_image, d_image)
    else:
        denom = jax.vmap(lambda v: dual_norm_sq_coords(v, A.space))(d_image)
    mask = denom > 0
    if not bool(jnp.any(mask)):
        logger.info('estimate_alpha: operator is constant on the samples')
        return float('inf')
    estimate = float(jnp.min(jnp.where(mask, inner / jnp.where(mask, denom, 1.0), jnp.inf)))
    if A.alpha > estimate + tol:
        logger.warning(f'Declared alpha {A.alpha} exceeds the sampled estimate {estimate}')
    return estimate


def check_relatively_nonexpansive(
        T: FixedPointMap,
        C: FeasibleSet,
        samples: Optional[int] = None,
        tol: Optional[float] = None
) -> List[CheckResult]:
    """
    Checks :math:`\\phi(p, T x) \\le \\phi(p, x) + tol` for every declared fixed point ``p``
    and sampled :math:`x \\in C`, and that T maps the samples into C. The coincidence of
    fixed and asymptotic fixed points is reported as ``assumed``.

    Raises:
        ValueError: no fixed point is declared, or a declared one is not fixed.
    """
    samples = config.resolve(samples, config.CHECK_SAMPLES)
    tol = config.resolve(tol, config.CHECK_TOL)
    fixed = T.fixed_points(C)
    if not fixed:
        raise ValueError('check_relatively_nonexpansive needs at least one known fixed point')
    for p in fixed:
        gap = float(jnp.linalg.norm(T.coords(p.coords) - p.coords))
        if gap > tol:
            raise ValueError(f'Declared fixed point {p} is moved by {gap:.3e}')

    space = T.space
    xs = C.sample(samples)
    images = jax.vmap(T.coords)(xs)
    ps = jnp.stack([p.coords for p in fixed])

    def slack(p):
        before = jax.vmap(lambda x: lyapunov_coords(p, x, space))(xs)
        after = jax.vmap(lambda y: lyapunov_coords(p, y, space))(images)
        return before - after

    slacks = jax.vmap(slack)(ps)
    worst = jnp.unravel_index(jnp.argmin(slacks), slacks.shape)
    margin = float(slacks[worst]) + tol
    phi = CheckResult(
        'phi(p, Tx) <= phi(p, x)', PASS if margin >= 0 else FAIL, margin,
        (Point(ps[worst[0]], space), Point(xs[worst[1]], space)),
        f'{len(fixed)} fixed points x {samples} samples')

    outside = jax.vmap(C.violation)(images)
    k = int(jnp.argmax(outside))
    range_margin = config.SET_TOL - float(outside[k])
    in_range = CheckResult(
        'T(C) in C', PASS if range_margin >= 0 else FAIL, range_margin, Point(xs[k], space), '')
    asymptotic = CheckResult(
        'asymptotic fixed points', ASSUMED, float('nan'), None, 'not finitely checkable')
    return [phi, in_range, asymptotic]


def check_norm_domination(
        A: MonotoneOperator,
        solution: Point,
        C: FeasibleSet,
        samples: Optional[int] = None,
        tol: Optional[float] = None
) -> CheckResult:
    """
    Checks :math:`\\|A x\\|_* \\le \\|A x - A u\\|_* + tol` for the supplied solution
    ``u`` and sampled :math:`x \\in C`.
    """
    _check_space(A, solution)
    samples = config.resolve(samples, config.CHECK_SAMPLES)
    tol = config.resolve(tol, config.CHECK_TOL)
    xs = jnp.concatenate([C.sample(samples), C.corners()], axis=0)
    images = jax.vmap(A.coords)(xs)
    au = A.coords(solution.coords)
    lhs = jax.vmap(lambda v: dual_norm_coords(v, A.space))(images)
    rhs = jax.vmap(lambda v: dual_norm_coords(v - au, A.space))(images)
    slack = rhs - lhs
    k = int(jnp.argmin(slack))
    margin = float(slack[k]) + tol
    return CheckResult(
        '||Ax|| <= ||Ax - Au||', PASS if margin >= 0 else FAIL, margin, Point(xs[k], A.space),
        f'solution {solution.tolist()}')
