r"""
Finite-dimensional Banach-space geometry.

Two concrete families are supported: euclidean :math:`\mathbb{R}^n` and
:math:`\ell_p^n` with :math:`1 < p \le 2`. Both are smooth, strictly convex and
2-uniformly convex, so the normalized duality mapping

.. math::
    J x = \{x^* \in E^* : \langle x, x^* \rangle = \|x\|^2 = \|x^*\|_*^2\}

is single-valued and has a closed form. On :math:`\ell_p^n`

.. math::
    (J x)_i = \|x\|_p^{2-p} |x_i|^{p-2} x_i, \qquad J(0) = 0,

and :math:`J^{-1}` is the same formula with the conjugate exponent :math:`q = p/(p-1)`.

Vectors of :math:`E` are :class:`Point` and vectors of :math:`E^*` are
:class:`DualPoint`; the duality map is the only bridge between them.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import jax
import jax.numpy as jnp

from .math_utils import validate_vector_shape

logger = logging.getLogger(__name__)


class SpaceKind(str, Enum):
    EUCLIDEAN = 'euclidean'
    LP = 'lp'


@dataclass(frozen=True)
class SpaceDescriptor:
    """
    Geometry of a finite-dimensional coordinate space.

    Args:
        - kind: ``euclidean`` or ``lp``.
        - dim: number of coordinates.
        - p: exponent of the norm, in (1, 2]; always 2 for euclidean spaces.
        - c: 2-uniform-convexity constant in (0, 1]; always 1 for euclidean spaces.

    .. note::
        The constant ``c`` is supplied by the user. For :math:`\\ell_p` with
        :math:`1 < p \\le 2` the literature value is :math:`\\sqrt{p - 1}`; it is
        documented here but never derived.
    """
    kind: SpaceKind
    dim: int
    p: float = 2.0
    c: float = 1.0

    def __post_init__(self):
        kind = SpaceKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f'Space dimension must be a positive integer, got {self.dim}')
        object.__setattr__(self, 'dim', int(self.dim))
        object.__setattr__(self, 'p', float(self.p))
        object.__setattr__(self, 'c', float(self.c))
        if kind is SpaceKind.EUCLIDEAN:
            if self.p != 2.0:
                raise ValueError(f'A euclidean space has p = 2, got {self.p}')
            if self.c != 1.0:
                raise ValueError(f'A euclidean space has c = 1, got {self.c}')
        else:
            if not 1.0 < self.p <= 2.0:
                raise ValueError(f'lp spaces need 1 < p <= 2, got {self.p}')
            if not 0.0 < self.c <= 1.0:
                raise ValueError(f'The uniform convexity constant must lie in (0, 1], got {self.c}')

    @classmethod
    def euclidean(cls, dim: int) -> 'SpaceDescriptor':
        return cls(SpaceKind.EUCLIDEAN, dim)

    @classmethod
    def lp(cls, dim: int, p: float, c: float) -> 'SpaceDescriptor':
        return cls(SpaceKind.LP, dim, p, c)

    @property
    def is_euclidean(self) -> bool:
        return self.kind is SpaceKind.EUCLIDEAN

    @property
    def q(self) -> float:
        """ Conjugate exponent, 1/p + 1/q = 1. """
        return self.p / (self.p - 1.0)

    def point(self, coords) -> 'Point':
        return Point(coords, self)

    def dual_point(self, coords) -> 'DualPoint':
        return DualPoint(coords, self)

    def zero(self) -> 'Point':
        return Point(jnp.zeros(self.dim), self)

    @classmethod
    def from_dict(cls, data: dict) -> 'SpaceDescriptor':
        """
        Build a space from its problem-file form
        ``{"kind": "euclidean"|"lp", "dim": n, "p": ..., "c": ...}``.
        """
        kind = SpaceKind(data.get('kind', 'euclidean'))
        if 'dim' not in data:
            raise ValueError('Space description needs a `dim` field')
        if kind is SpaceKind.EUCLIDEAN:
            return cls(kind, data['dim'], 2.0, data.get('c', 1.0))
        if 'p' not in data or 'c' not in data:
            raise ValueError('An lp space description needs both `p` and `c`')
        return cls(kind, data['dim'], data['p'], data['c'])

    def to_dict(self) -> dict:
        data = {'kind': self.kind.value, 'dim': self.dim}
        if not self.is_euclidean:
            data.update(p=self.p, c=self.c)
        return data


@dataclass(frozen=True, eq=False)
class _Vector:
    coords: jnp.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        coords = jnp.atleast_1d(jnp.asarray(self.coords, dtype=jnp.float64))
        validate_vector_shape(coords, self.space.dim, type(self).__name__)
        if not bool(jnp.all(jnp.isfinite(coords))):
            raise ValueError(f'{type(self).__name__} coordinates must be finite, got {coords}')
        object.__setattr__(self, 'coords', coords)

    def tolist(self) -> list:
        return [float(v) for v in self.coords]

    def __repr__(self) -> str:
        return f'{type(self).__name__}({self.tolist()}, {self.space.kind.value})'


class Point(_Vector):
    """ An element of the primal space E. """


class DualPoint(_Vector):
    """ An element of the dual space E*. """


def _expect(value, cls, name: str):
    if not isinstance(value, cls):
        raise TypeError(f'`{name}` must be a {cls.__name__}, got {type(value).__name__}')


def _same_space(a: _Vector, b: _Vector):
    if a.space != b.space:
        raise ValueError(f'Dimension mismatch: {a.space} and {b.space}')


@jax.jit
def lp_norm(v: jnp.ndarray, p: float) -> jnp.ndarray:
    """ p-norm of a coordinate vector, scaled by its largest entry to avoid underflow. """
    m = jnp.max(jnp.abs(v))
    safe = jnp.where(m > 0, m, 1.0)
    return jnp.where(m > 0, safe * jnp.sum((jnp.abs(v) / safe) ** p) ** (1.0 / p), 0.0)


@jax.jit
def lp_duality(v: jnp.ndarray, p: float) -> jnp.ndarray:
    """ Normalized duality map of the p-norm; continuous extension J(0) = 0. """
    n = lp_norm(v, p)
    safe = jnp.where(n > 0, n, 1.0)
    return jnp.where(n > 0, safe * jnp.sign(v) * (jnp.abs(v) / safe) ** (p - 1.0), 0.0)


def norm_coords(v: jnp.ndarray, space: SpaceDescriptor) -> jnp.ndarray:
    if space.is_euclidean:
        return jnp.linalg.norm(v)
    return lp_norm(v, space.p)


def dual_norm_coords(v: jnp.ndarray, space: SpaceDescriptor) -> jnp.ndarray:
    if space.is_euclidean:
        return jnp.linalg.norm(v)
    return lp_norm(v, space.q)


def norm_sq_coords(v: jnp.ndarray, space: SpaceDescriptor) -> jnp.ndarray:
    if space.is_euclidean:
        return jnp.dot(v, v)
    return lp_norm(v, space.p) ** 2


def dual_norm_sq_coords(v: jnp.ndarray, space: SpaceDescriptor) -> jnp.ndarray:
    if space.is_euclidean:
        return jnp.dot(v, v)
    return lp_norm(v, space.q) ** 2


def duality_coords(v: jnp.ndarray, space: SpaceDescriptor) -> jnp.ndarray:
    if space.is_euclidean:
        return v
    return lp_duality(v, space.p)


def inverse_duality_coords(v: jnp.ndarray, space: SpaceDescriptor) -> jnp.ndarray:
    if space.is_euclidean:
        return v
    return lp_duality(v, space.q)


def lyapunov_coords(x: jnp.ndarray, y: jnp.ndarray, space: SpaceDescriptor) -> jnp.ndarray:
    if space.is_euclidean:
        d = x - y
        return jnp.dot(d, d)
    value = norm_sq_coords(x, space) - 2.0 * jnp.dot(x, lp_duality(y, space.p)) + norm_sq_coords(y, space)
    return jnp.maximum(value, 0.0)


def norm(x: Point) -> float:
    """ Norm of ``x``: euclidean norm or p-norm depending on the space kind. """
    _expect(x, Point, 'x')
    return float(norm_coords(x.coords, x.space))


def dual_norm(xs: DualPoint) -> float:
    """ Dual norm of ``xs``, i.e. the q-norm with 1/p + 1/q = 1. """
    _expect(xs, DualPoint, 'xs')
    return float(dual_norm_coords(xs.coords, xs.space))


def pairing(xs: DualPoint, y: Point) -> float:
    """ Duality pairing :math:`\\langle x^*, y \\rangle = \\sum_i x^*_i y_i`. """
    _expect(xs, DualPoint, 'xs')
    _expect(y, Point, 'y')
    _same_space(xs, y)
    return float(jnp.dot(xs.coords, y.coords))


def duality_map(x: Point) -> DualPoint:
    """ The normalized duality mapping :math:`J x`. Identity on euclidean coordinates. """
    _expect(x, Point, 'x')
    return DualPoint(duality_coords(x.coords, x.space), x.space)


def duality_map_inverse(xs: DualPoint) -> Point:
    """ :math:`J^{-1} x^*`, the duality map of the dual space. """
    _expect(xs, DualPoint, 'xs')
    return Point(inverse_duality_coords(xs.coords, xs.space), xs.space)


def lyapunov(x: Point, y: Point) -> float:
    r"""
    Lyapunov functional

    .. math::
        \phi(x, y) = \|x\|^2 - 2 \langle x, J y \rangle + \|y\|^2 .

    In euclidean spaces it is evaluated as :math:`\|x - y\|^2`, which it equals.
    Rounding never makes it negative.
    """
    _expect(x, Point, 'x')
    _expect(y, Point, 'y')
    _same_space(x, y)
    return float(lyapunov_coords(x.coords, y.coords, x.space))


def v_functional(x: Point, xs: DualPoint) -> float:
    r"""
    :math:`V(x, x^*) = \|x\|^2 - 2 \langle x^*, x \rangle + \|x^*\|_*^2 = \phi(x, J^{-1} x^*)`.
    """
    _expect(x, Point, 'x')
    _expect(xs, DualPoint, 'xs')
    _same_space(x, xs)
    if x.space.is_euclidean:
        d = x.coords - xs.coords
        return float(jnp.dot(d, d))
    value = (norm_sq_coords(x.coords, x.space) - 2.0 * jnp.dot(xs.coords, x.coords)
             + dual_norm_sq_coords(xs.coords, x.space))
    return float(value)
