r"""
Bifunctions and the equilibrium resolvent.

For a bifunction :math:`f` satisfying (A1)-(A4), a monotone operator :math:`A` and
:math:`r > 0`, the resolvent :math:`K_r x` is the unique :math:`u \in C` with

.. math::
    f(u, y) + \langle A u, y - u \rangle + \frac{1}{r} \langle y - u, J u - J x \rangle \ge 0
    \quad \forall y \in C .

Since :math:`y \mapsto` (left side) is nonnegative on C and vanishes at :math:`y = u`, a
differentiable :math:`f` reduces the problem to the variational inequality
:math:`\langle R(u), y - u \rangle \ge 0` with

.. math::
    R(u) = \partial_y f(u, \cdot)|_{y=u} + A u + \frac{1}{r} (J u - J x).

That residual is solved by bisection on the real line, and by a damped projected
iteration in any dimension when :math:`f \equiv 0`.
"""
import logging
from collections import namedtuple
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple, Union

import jax
import jax.numpy as jnp
from scipy import optimize

from . import config
from .math_utils import FAIL, PASS, CheckResult, ConvergenceError, ResolventError, seeded_key
from .operators import MonotoneOperator, OperatorKind
from .sets import FeasibleSet, contains, generalized_projection
from .space import DualPoint, Point, _expect, duality_coords, inverse_duality_coords

logger = logging.getLogger(__name__)

"""
Outcome of :func:`verify_resolvent`: the worst violation of the defining inequality and
the sample ``y`` that produced it.
"""
ResolventReport = namedtuple('ResolventReport', ['max_violation', 'witness'])


class BifunctionKind(str, Enum):
    QUADRATIC_1D = 'quadratic1d'
    ZERO = 'zero'
    CUSTOM = 'custom'


def _quadratic(a: float, b: float) -> Callable:
    def fn(u, y):
        return a * jnp.dot(y, y) + b * jnp.dot(u, y) - (a + b) * jnp.dot(u, u)
    return fn


@dataclass(frozen=True, eq=False)
class Bifunction:
    """
    A bifunction :math:`f : C \\times C \\to \\mathbb{R}` on coordinate arrays.

    Args:
        - kind: ``quadratic1d`` for :math:`a y^2 + b u y - (a + b) u^2` with
          :math:`a > 0, b \\ge 0`; ``zero``; or ``custom``.
        - fn: ``fn(u, y)`` evaluated on coordinate vectors, written with ``jax.numpy``.
        - partial_y: derivative of :math:`y \\mapsto f(u, y)` at :math:`y = u`, as a
          function of ``u``. Derived with ``jax.grad`` when omitted.
        - a, b: quadratic coefficients, kept for serialization.
    """
    kind: BifunctionKind
    fn: Callable
    partial_y: Optional[Callable] = None
    a: Optional[float] = None
    b: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', BifunctionKind(self.kind))
        if self.partial_y is None:
            fn = self.fn
            object.__setattr__(self, 'partial_y', lambda u: jax.grad(lambda y: fn(u, y))(u))

    @classmethod
    def quadratic_1d(cls, a: float, b: float) -> 'Bifunction':
        if not a > 0:
            raise ValueError(f'quadratic1d needs a > 0, got {a}')
        if b < 0:
            raise ValueError(f'quadratic1d needs b >= 0, got {b}')
        a, b = float(a), float(b)
        return cls(BifunctionKind.QUADRATIC_1D, _quadratic(a, b), lambda u: (2.0 * a + b) * u, a, b)

    @classmethod
    def zero(cls) -> 'Bifunction':
        return cls(BifunctionKind.ZERO, lambda u, y: 0.0 * jnp.dot(u, y), jnp.zeros_like)

    @classmethod
    def custom(cls, fn: Callable, partial_y: Optional[Callable] = None) -> 'Bifunction':
        return cls(BifunctionKind.CUSTOM, fn, partial_y)

    def evaluate(self, x: Point, y: Point) -> float:
        _expect(x, Point, 'x')
        _expect(y, Point, 'y')
        return float(self.fn(x.coords, y.coords))

    def partial_y_at_diagonal(self, u: Point) -> DualPoint:
        _expect(u, Point, 'u')
        return DualPoint(self.partial_y(u.coords), u.space)

    @classmethod
    def from_dict(cls, data: dict, dim: int) -> 'Bifunction':
        """
        ``{"type": "quadratic1d", "a": 9, "b": 3}`` or ``{"type": "zero"}``. Quadratic
        coefficients outside ``a > 0, b >= 0`` load as a custom bifunction with a warning.
        """
        kind = BifunctionKind(data.get('type'))
        if kind is BifunctionKind.ZERO:
            return cls.zero()
        if kind is BifunctionKind.QUADRATIC_1D:
            if dim != 1:
                raise ValueError(f'quadratic1d lives on the real line, got dimension {dim}')
            a, b = float(data['a']), float(data['b'])
            if a > 0 and b >= 0:
                return cls.quadratic_1d(a, b)
            logger.warning(f'quadratic1d with a={a}, b={b} violates a > 0, b >= 0; loaded as custom')
            return cls(BifunctionKind.CUSTOM, _quadratic(a, b), lambda u: (2.0 * a + b) * u, a, b)
        raise ValueError('Custom bifunctions have no file form')

    def to_dict(self) -> dict:
        if self.kind is BifunctionKind.ZERO:
            return {'type': 'zero'}
        if self.a is not None:
            return {'type': 'quadratic1d', 'a': self.a, 'b': self.b}
        raise ValueError('Custom bifunctions have no file form')


@dataclass(frozen=True, eq=False)
class ResolventQuery:
    """ The data of one resolvent evaluation :math:`K_r x`. """
    f: Bifunction
    A: MonotoneOperator
    C: FeasibleSet
    r: float
    x: Point

    def __post_init__(self):
        _expect(self.x, Point, 'x')
        if not self.r > 0:
            raise ValueError(f'The resolvent parameter r must be positive, got {self.r}')
        if self.x.space.dim != self.C.dim or self.A.space.dim != self.C.dim:
            raise ValueError(
                f'Dimension mismatch: x has {self.x.space.dim}, set has {self.C.dim}, operator has {self.A.space.dim}')

    @property
    def space(self):
        return self.x.space


def _interval(C: Union[FeasibleSet, Tuple[float, float]]) -> Tuple[float, float]:
    if isinstance(C, FeasibleSet):
        return C.interval()
    lo, hi = C
    return float(lo), float(hi)


def resolvent_quadratic_1d(
        a: float,
        b: float,
        lam: float,
        r: float,
        C: Union[FeasibleSet, Tuple[float, float]],
        x: float,
        tol: Optional[float] = None
) -> float:
    r"""
    Closed-form resolvent of :math:`f(u, y) = a y^2 + b u y - (a + b) u^2` with
    :math:`A = \lambda I` on an interval:

    .. math::
        u = \frac{x}{1 + r (2a + b + \lambda)},

    clamped to the interval when it falls outside. A clamped value is accepted only if
    the defining inequality holds at both interval endpoints.

    Raises:
        ResolventError: the clamped value fails the endpoint check.
    """
    if not a > 0 or b < 0 or lam < 0 or not r > 0:
        raise ValueError(f'resolvent_quadratic_1d needs a > 0, b >= 0, lam >= 0, r > 0; got {a}, {b}, {lam}, {r}')
    tol = config.resolve(tol, config.RESOLVENT_VERIFY_TOL)
    lo, hi = _interval(C)
    x = float(x)
    u = x / (1.0 + r * (2.0 * a + b + lam))
    if lo <= u <= hi:
        return u

    clamped = min(max(u, lo), hi)

    def defining(y):
        return a * y * y + b * clamped * y - (a + b) * clamped * clamped \
            + lam * clamped * (y - clamped) + (y - clamped) * (clamped - x) / r

    for y in (lo, hi):
        if jnp.isfinite(y) and defining(y) < -tol:
            raise ResolventError(
                f'Clamped resolvent {clamped} violates the defining inequality at y={y}',
                violation=-defining(y), witness=y)
    logger.debug(f'closed-form resolvent {u} clamped to {clamped}')
    return clamped


def _defining_values(u: jnp.ndarray, ys: jnp.ndarray, q: ResolventQuery) -> jnp.ndarray:
    space = q.space
    au = q.A.coords(u)
    gap = (duality_coords(u, space) - duality_coords(q.x.coords, space)) / q.r
    return jax.vmap(lambda y: q.f.fn(u, y) + jnp.dot(au + gap, y - u))(ys)


def verify_resolvent(u: Point, q: ResolventQuery, samples: Optional[int] = None) -> ResolventReport:
    """
    Evaluates the defining inequality of :math:`K_r x` at ``samples`` deterministic points
    of C plus the vertices of C. ``max_violation`` is the largest amount by which it fails
    (zero when it holds everywhere).
    """
    _expect(u, Point, 'u')
    if not contains(q.C, u):
        raise ValueError(f'Resolvent candidate {u} is not a point of the set')
    samples = config.resolve(samples, config.RESOLVENT_VERIFY_SAMPLES)
    ys = jnp.concatenate([q.C.sample(samples), q.C.corners()], axis=0)
    values = _defining_values(u.coords, ys, q)
    k = int(jnp.argmin(values))
    return ResolventReport(max(0.0, -float(values[k])), Point(ys[k], q.space))


def _residual_1d(q: ResolventQuery) -> Callable[[float], float]:
    space = q.space
    jx = float(duality_coords(q.x.coords, space)[0])

    def residual(u: float) -> float:
        coords = jnp.array([u])
        value = q.f.partial_y(coords) + q.A.coords(coords) + (duality_coords(coords, space) - jx) / q.r
        return float(jnp.reshape(value, (-1,))[0])

    return residual


def _expand(residual, centre: float, bound: float, direction: float, limit: int = 200) -> float:
    if jnp.isfinite(bound):
        return bound
    width = max(1.0, abs(centre))
    for _ in range(limit):
        end = centre + direction * width
        value = residual(end)
        if (direction < 0 and value <= 0) or (direction > 0 and value >= 0):
            return end
        width *= 2.0
    raise ConvergenceError(f'Could not bracket the resolvent residual around {centre}', best=None)


def _bisection_resolvent(q: ResolventQuery, tol: float, max_iter: int, start: Optional[Point]) -> Point:
    residual = _residual_1d(q)
    lo, hi = q.C.interval()
    centre = float((start if start is not None else q.x).coords[0])
    lo = _expand(residual, min(centre, hi), lo, -1.0)
    hi = _expand(residual, max(centre, lo), hi, 1.0)
    if residual(lo) >= 0:
        u = lo
    elif residual(hi) <= 0:
        u = hi
    else:
        try:
            u = optimize.bisect(residual, lo, hi, xtol=tol, maxiter=max_iter)
        except RuntimeError as err:
            raise ConvergenceError(f'Bisection of the resolvent residual failed: {err}', best=None) from err
    return Point(jnp.array([u]), q.space)


def _fixed_point_resolvent(q: ResolventQuery, tol: float, max_iter: int, start: Optional[Point]) -> Point:
    space = q.space
    theta = 0.5 * min(1.0, q.A.alpha / q.r)
    jx = duality_coords(q.x.coords, space)
    u = start if start is not None else generalized_projection(q.C, q.x)
    step = float('inf')
    for k in range(1, max_iter + 1):
        ju = duality_coords(u.coords, space)
        w = (1.0 - theta) * ju + theta * (jx - q.r * q.A.coords(u.coords))
        u_next = generalized_projection(q.C, Point(inverse_duality_coords(w, space), space))
        step = float(jnp.linalg.norm(u_next.coords - u.coords))
        u = u_next
        if step <= tol:
            logger.debug(f'resolvent fixed point: {k} iterations, step {step:.3e}')
            return u
    raise ConvergenceError(
        f'Resolvent iteration did not reach tolerance {tol} in {max_iter} iterations', best=u, residual=step)


def _solve_and_verify(
        q: ResolventQuery,
        tol: Optional[float],
        start: Optional[Point],
        max_iter: Optional[int]
) -> Tuple[Point, ResolventReport]:
    max_iter = config.resolve(max_iter, config.RESOLVENT_MAX_ITER)
    if start is not None:
        _expect(start, Point, 'start')
        if not contains(q.C, start):
            raise ValueError(f'Inner starting point {start} is not a point of the set')

    if q.f.kind is BifunctionKind.ZERO and q.A.kind is OperatorKind.ZERO:
        u = generalized_projection(q.C, q.x)
    elif q.f.kind is BifunctionKind.ZERO:
        u = _fixed_point_resolvent(q, config.resolve(tol, config.RESOLVENT_FIXED_POINT_TOL), max_iter, start)
    elif q.space.dim == 1:
        u = _bisection_resolvent(q, config.resolve(tol, config.RESOLVENT_BISECTION_TOL), max_iter, start)
    else:
        raise ValueError('The numerical resolvent needs a one-dimensional space or f = 0')

    report = verify_resolvent(u, q)
    if report.max_violation > config.RESOLVENT_VERIFY_TOL:
        raise ResolventError(
            f'Resolvent candidate {u} violates the defining inequality by {report.max_violation:.3e}',
            violation=report.max_violation, witness=report.witness)
    return u, report


def resolvent_solve(
        q: ResolventQuery,
        tol: Optional[float] = None,
        start: Optional[Point] = None,
        max_iter: Optional[int] = None
) -> Point:
    """
    Numerical resolvent :math:`K_r x`.

    On the real line the residual :math:`R` is bisected over the interval C (unbounded
    ends are bracketed by doubling); if :math:`R` does not change sign the matching
    endpoint solves the problem. For :math:`f \\equiv 0` in any dimension the damped
    iteration

    .. math::
        u \\leftarrow \\Pi_C J^{-1}((1 - \\theta) J u + \\theta (J x - r A u)),
        \\qquad \\theta = \\tfrac{1}{2} \\min(1, \\alpha / r)

    runs until successive iterates are ``tol`` apart. ``start`` is the starting point of
    that iteration, or the bracket centre on the real line.

    Raises:
        ConvergenceError: the inner iteration ran out of budget.
        ResolventError: the result fails :func:`verify_resolvent`.
    """
    return _solve_and_verify(q, tol, start, max_iter)[0]


def compute_resolvent(
        q: ResolventQuery,
        tol: Optional[float] = None,
        start: Optional[Point] = None
) -> Tuple[Point, ResolventReport]:
    """
    Resolvent with its verification report. Uses the closed form for a ``quadratic1d``
    bifunction with ``A = lam * I`` on an interval, the numerical solver otherwise or
    when the closed form is rejected.
    """
    lam = q.A.multiplier
    if q.f.kind is BifunctionKind.QUADRATIC_1D and lam is not None and lam >= 0:
        try:
            value = resolvent_quadratic_1d(q.f.a, q.f.b, lam, q.r, q.C, float(q.x.coords[0]))
            u = Point(jnp.array([value]), q.space)
            return u, verify_resolvent(u, q)
        except ResolventError as err:
            logger.debug(f'closed-form resolvent rejected ({err}); solving numerically')
    return _solve_and_verify(q, tol, start, None)


def check_bifunction_axioms(
        f: Bifunction,
        C: FeasibleSet,
        samples: Optional[int] = None,
        tol: Optional[float] = None
) -> List[CheckResult]:
    """
    Sampled checks of (A1) :math:`f(x, x) = 0`, (A2) :math:`f(x, y) + f(y, x) \\le 0`,
    (A3) upper hemicontinuity along :math:`t \\in \\{10^{-2}, 10^{-4}, 10^{-6}\\}` (the
    violation must not grow as t shrinks) and (A4) midpoint convexity in the second
    argument. Not a proof.
    """
    samples = config.resolve(samples, config.CHECK_SAMPLES)
    tol = config.resolve(tol, config.CHECK_TOL)
    if samples < 1:
        raise ValueError(f'check_bifunction_axioms needs at least one sample, got {samples}')
    fn = jax.vmap(f.fn)
    xs = C.sample(samples)
    ys = C.sample(samples, key=seeded_key(0))
    zs = C.sample(samples, key=seeded_key(1))

    def result(name, slack, witness, detail=''):
        k = int(jnp.argmin(slack))
        margin = float(slack[k]) + tol
        return CheckResult(name, PASS if margin >= 0 else FAIL, margin, witness(k), detail)

    a1 = result('(A1) f(x,x) = 0', -jnp.abs(fn(xs, xs)), lambda k: xs[k])
    a2 = result('(A2) f(x,y) + f(y,x) <= 0', -(fn(xs, ys) + fn(ys, xs)), lambda k: (xs[k], ys[k]))

    base = fn(xs, ys)
    violations = []
    for t in (1e-2, 1e-4, 1e-6):
        moved = fn(t * zs + (1.0 - t) * xs, ys)
        violations.append(jnp.maximum(moved - base, 0.0))
    worst = jnp.max(jnp.stack(violations), axis=1)
    last = int(jnp.argmax(violations[-1]))
    a3_margin = float(jnp.min(worst[:-1] - worst[1:])) + tol
    a3 = CheckResult(
        '(A3) lim f(tz+(1-t)x, y) <= f(x,y)', PASS if a3_margin >= 0 else FAIL, a3_margin,
        (xs[last], ys[last], zs[last]), f'worst violation per t: {[float(v) for v in worst]}')

    midpoint = fn(xs, 0.5 * (ys + zs))
    chord = 0.5 * (fn(xs, ys) + fn(xs, zs))
    a4 = result('(A4) y -> f(x,y) convex', chord - midpoint, lambda k: (xs[k], ys[k], zs[k]))
    return [a1, a2, a3, a4]
