r"""
Extragradient iteration for a common element of a variational inequality, a generalized
equilibrium problem and the fixed-point sets of two relatively nonexpansive maps.

For :math:`k \ge 1`:

.. math::
    \begin{cases}
        u^k &= K_{r_k} x^k \\
        y^k &= \Pi_C J^{-1}(J x^k - \tau A x^k) \\
        z^k &= \Pi_C J^{-1}(J u^k - \tau A u^k) \\
        x^{k+1} &= \Pi_C J^{-1}(\alpha_k J x^k + \beta_k J T z^k + \gamma_k J S y^k)
    \end{cases}

The weights are combined on the dual side, then mapped back and projected, in every
geometry. Strong convergence needs

- (i) :math:`\alpha_k + \beta_k + \gamma_k = 1`,
- (ii) :math:`\liminf \alpha_k \beta_k > 0` and :math:`\liminf \alpha_k \gamma_k > 0`,
- (iii) :math:`r_k \ge a > 0`,
- (iv) :math:`0 < \tau < c^2 \alpha / 2`.
"""
import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

import jax.numpy as jnp
import pandas as pd

from . import config
from .equilibrium import Bifunction, ResolventQuery, compute_resolvent
from .math_utils import (
    FAIL,
    PASS,
    WARN,
    CheckResult,
    ConvergenceError,
    MapRangeError,
    ResolventError,
    ScheduleError,
    format_vector,
)
from .operators import FixedPointMap, MonotoneOperator, apply_map, check_norm_domination
from .sets import FeasibleSet, contains, generalized_projection_with_residual, metric_projection
from .space import Point, SpaceDescriptor, _expect, duality_coords, inverse_duality_coords, lyapunov_coords, norm_coords

logger = logging.getLogger(__name__)

CONDITION_WEIGHTS = '(i) α+β+γ=1'
CONDITION_LIMINF = '(ii) liminf αβ>0, liminf αγ>0'
CONDITION_FLOOR = '(iii) r≥a>0'
CONDITION_STEP = '(iv) 0<τ<c²α/2'
HARD_CONDITIONS = (CONDITION_WEIGHTS, CONDITION_FLOOR, CONDITION_STEP)
SCHEDULE_TOL = 1e-12


class SequenceKind(str, Enum):
    CONSTANT = 'constant'
    AFFINE_RECIPROCAL = 'affine_reciprocal'


@dataclass(frozen=True)
class ParametricSequence:
    """ The sequence :math:`k \\mapsto base + slope / k`, ``slope = 0`` for constants. """
    kind: SequenceKind
    base: float
    slope: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', SequenceKind(self.kind))
        object.__setattr__(self, 'base', float(self.base))
        object.__setattr__(self, 'slope', float(self.slope))
        if self.kind is SequenceKind.CONSTANT and self.slope != 0.0:
            raise ValueError('A constant sequence has no slope')

    @classmethod
    def constant(cls, value: float) -> 'ParametricSequence':
        return cls(SequenceKind.CONSTANT, value)

    @classmethod
    def affine_reciprocal(cls, base: float, slope: float) -> 'ParametricSequence':
        return cls(SequenceKind.AFFINE_RECIPROCAL, base, slope)

    def __call__(self, k: int) -> float:
        if k < 1:
            raise ValueError(f'Iterations are counted from 1, got {k}')
        if self.kind is SequenceKind.CONSTANT:
            return self.base
        return self.base + self.slope / k

    def values(self, horizon: int) -> jnp.ndarray:
        return self.base + self.slope / jnp.arange(1, horizon + 1, dtype=jnp.float64)

    @property
    def limit(self) -> float:
        return self.base

    @property
    def infimum(self) -> float:
        """ Smallest value over k >= 1: reached at k = 1 or in the limit. """
        return min(self.base + self.slope, self.base)

    @property
    def supremum(self) -> float:
        return max(self.base + self.slope, self.base)

    @classmethod
    def from_dict(cls, data) -> 'ParametricSequence':
        """
        A bare number, ``{"type": "constant", "value": v}`` or
        ``{"type": "affine_reciprocal", "base": b, "slope": s}``.
        """
        if isinstance(data, (int, float)):
            return cls.constant(data)
        kind = SequenceKind(data.get('type'))
        if kind is SequenceKind.CONSTANT:
            return cls.constant(data['value'])
        return cls.affine_reciprocal(data['base'], data['slope'])

    def to_dict(self) -> dict:
        if self.kind is SequenceKind.CONSTANT:
            return {'type': 'constant', 'value': self.base}
        return {'type': 'affine_reciprocal', 'base': self.base, 'slope': self.slope}


@dataclass(frozen=True)
class Schedule:
    """
    Parameter sequences of the iteration.

    Args:
        - alpha_k, beta_k, gamma_k: weights of the dual combination.
        - r_k: resolvent parameters.
        - tau: step size of the two projection steps.
        - a_floor: the lower bound ``a`` of the resolvent parameters.
    """
    alpha_k: ParametricSequence
    beta_k: ParametricSequence
    gamma_k: ParametricSequence
    r_k: ParametricSequence
    tau: float
    a_floor: float

    def weights(self, k: int) -> Tuple[float, float, float]:
        return self.alpha_k(k), self.beta_k(k), self.gamma_k(k)

    @classmethod
    def from_dict(cls, data: dict) -> 'Schedule':
        return cls(
            ParametricSequence.from_dict(data['alpha']),
            ParametricSequence.from_dict(data['beta']),
            ParametricSequence.from_dict(data['gamma']),
            ParametricSequence.from_dict(data['r']),
            float(data['tau']),
            float(data['a_floor']),
        )

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha_k.to_dict(),
            'beta': self.beta_k.to_dict(),
            'gamma': self.gamma_k.to_dict(),
            'r': self.r_k.to_dict(),
            'tau': self.tau,
            'a_floor': self.a_floor,
        }


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """
    The data of a common-solution problem. ``reference_solution``, when known, is a member
    of the common solution set and enables the φ-gap diagnostics.
    """
    space: SpaceDescriptor
    C: FeasibleSet
    f: Bifunction
    A: MonotoneOperator
    T: FixedPointMap
    S: FixedPointMap
    reference_solution: Optional[Point] = None

    def __post_init__(self):
        dims = {'set': self.C.dim, 'operator': self.A.space.dim, 'T': self.T.space.dim, 'S': self.S.space.dim}
        for name, dim in dims.items():
            if dim != self.space.dim:
                raise ValueError(f'Dimension mismatch: space has dimension {self.space.dim}, {name} has {dim}')
        if self.reference_solution is not None:
            _expect(self.reference_solution, Point, 'reference_solution')
            if not contains(self.C, self.reference_solution):
                raise ValueError(f'Reference solution {self.reference_solution} is not a point of the set')

    @classmethod
    def from_dict(cls, data: dict) -> 'ProblemInstance':
        """
        Build a problem from the ``space``, ``set``, ``bifunction``, ``operator``, ``mapT``,
        ``mapS`` and optional ``reference_solution`` fields of a problem file.
        """
        space = SpaceDescriptor.from_dict(data['space'])
        reference = data.get('reference_solution')
        return cls(
            space,
            FeasibleSet.from_dict(data['set'], space.dim),
            Bifunction.from_dict(data.get('bifunction', {'type': 'zero'}), space.dim),
            MonotoneOperator.from_dict(data['operator'], space),
            FixedPointMap.from_dict(data.get('mapT', {'type': 'identity'}), space),
            FixedPointMap.from_dict(data.get('mapS', {'type': 'identity'}), space),
            None if reference is None else space.point(reference),
        )

    def to_dict(self) -> dict:
        data = {
            'space': self.space.to_dict(),
            'set': self.C.to_dict(),
            'bifunction': self.f.to_dict(),
            'operator': self.A.to_dict(),
            'mapT': self.T.to_dict(),
            'mapS': self.S.to_dict(),
        }
        if self.reference_solution is not None:
            data['reference_solution'] = self.reference_solution.tolist()
        return data


class IterationRecord(NamedTuple):
    """
    One iteration. ``u`` and ``z`` are ``None`` for the classical two-step baseline.
    ``phi_gap``, ``phi_gap_y`` and ``phi_gap_z`` are :math:`\\phi(p, x^k)`,
    :math:`\\phi(p, y^k)` and :math:`\\phi(p, z^k)` for the reference solution ``p``.
    ``projection_residuals`` holds the inner residuals of the projections producing
    ``y``, ``z`` and ``x_next``.
    """
    k: int
    x: Point
    u: Optional[Point]
    y: Point
    z: Optional[Point]
    x_next: Point
    step_norm: float
    phi_gap: Optional[float]
    phi_gap_y: Optional[float]
    phi_gap_z: Optional[float]
    resolvent_violation: float
    projection_residuals: Tuple[float, ...]


class SolveStatus(str, Enum):
    CONVERGED = 'converged'
    REFERENCE_REACHED = 'reference_reached'
    MAX_ITERS = 'max_iters'
    INNER_FAILURE = 'inner_failure'


@dataclass
class SolveResult:
    status: SolveStatus
    final: Point
    trace: List[IterationRecord]
    message: str = ''

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_dataframe(self) -> pd.DataFrame:
        """
        The trace as a dataframe, one row per iteration. Point columns hold semicolon-joined
        coordinates; missing values are ``NaN``.
        """
        def text(point):
            return None if point is None else format_vector(point.coords)

        def scalar(value):
            return float('nan') if value is None else value

        rows = [{
            'k': rec.k,
            'x': text(rec.x),
            'u': text(rec.u),
            'y': text(rec.y),
            'z': text(rec.z),
            'x_next': text(rec.x_next),
            'step_norm': rec.step_norm,
            'phi_gap': scalar(rec.phi_gap),
            'phi_gap_y': scalar(rec.phi_gap_y),
            'phi_gap_z': scalar(rec.phi_gap_z),
            'resolvent_violation': rec.resolvent_violation,
        } for rec in self.trace]
        return pd.DataFrame(rows, columns=[
            'k', 'x', 'u', 'y', 'z', 'x_next', 'step_norm', 'phi_gap', 'phi_gap_y', 'phi_gap_z',
            'resolvent_violation'])


def validate_schedule(
        s: Schedule,
        alpha: float,
        c: float,
        horizon: int = 1000
) -> List[CheckResult]:
    """
    Diagnostics of conditions (i)-(iv) for a parametric schedule.

    (i) is decided on the parameters: bases sum to 1, slopes to 0, and every weight lies
    in [0, 1] for all k (its extremes are the value at k = 1 and the limit). The sums are
    also evaluated in floating point for ``k <= horizon``. (ii) compares the limits of
    the weight products with zero (a failure is a warning); (iii) compares the infimum of ``r_k``
    with ``a_floor``; (iv) is the strict step-size bound.
    """
    if not alpha > 0:
        raise ValueError(f'alpha must be positive, got {alpha}')
    if not 0.0 < c <= 1.0:
        raise ValueError(f'c must lie in (0, 1], got {c}')
    weights = (s.alpha_k, s.beta_k, s.gamma_k)

    base_error = abs(sum(w.base for w in weights) - 1.0)
    slope_error = abs(sum(w.slope for w in weights))
    lowest = min(w.infimum for w in weights)
    highest = max(w.supremum for w in weights)
    range_slack = min(lowest, 1.0 - highest)
    sums = jnp.sum(jnp.stack([w.values(horizon) for w in weights]), axis=0)
    sum_error = float(jnp.max(jnp.abs(sums - 1.0)))
    margin = min(SCHEDULE_TOL - base_error, SCHEDULE_TOL - slope_error, SCHEDULE_TOL - sum_error,
                 range_slack + SCHEDULE_TOL)
    weights_check = CheckResult(
        CONDITION_WEIGHTS, PASS if margin >= 0 else FAIL, margin, None,
        f'bases sum to 1 within {base_error:.1e}, slopes to 0 within {slope_error:.1e}, '
        f'weights in [{lowest:.6g}, {highest:.6g}] for all k')

    products = (s.alpha_k.limit * s.beta_k.limit, s.alpha_k.limit * s.gamma_k.limit)
    liminf = min(products)
    liminf_check = CheckResult(
        CONDITION_LIMINF, PASS if liminf > 0 else WARN, liminf, None,
        f'limits {products[0]:.6g} and {products[1]:.6g}')

    floor = s.r_k.infimum - s.a_floor
    floor_ok = s.a_floor > 0 and floor >= 0
    floor_check = CheckResult(
        CONDITION_FLOOR, PASS if floor_ok else FAIL, floor if s.a_floor > 0 else -1.0, None,
        f'inf r_k = {s.r_k.infimum:.6g}, a = {s.a_floor:.6g}')

    bound = c * c * alpha / 2.0
    step_margin = min(s.tau, bound - s.tau)
    step_check = CheckResult(
        CONDITION_STEP, PASS if step_margin > 0 else FAIL, step_margin, None,
        f'tau = {s.tau:.6g}, c²α/2 = {bound:.6g}')
    return [weights_check, liminf_check, floor_check, step_check]


def enforce_schedule(diagnostics: List[CheckResult]):
    """ Raise :class:`ScheduleError` for the first failing hard condition; warn on (ii). """
    for check in diagnostics:
        if check.status == FAIL and check.name in HARD_CONDITIONS:
            raise ScheduleError(f'Schedule violates {check.name}: {check.detail}', check.name, diagnostics)
        if check.status == WARN:
            logger.warning(f'Schedule condition {check.name} fails: {check.detail}')


def _forward_projection(C: FeasibleSet, A: MonotoneOperator, v: Point, tau: float) -> Tuple[Point, float]:
    space = v.space
    w = duality_coords(v.coords, space) - tau * A.coords(v.coords)
    return generalized_projection_with_residual(C, Point(inverse_duality_coords(w, space), space))


def step(
        p: ProblemInstance,
        s: Schedule,
        k: int,
        x: Point
) -> Tuple[Point, IterationRecord]:
    """
    One iteration from ``x = x^k``: the resolvent ``u``, the two projected forward steps
    ``y`` and ``z``, and the dual combination of ``x``, ``T z`` and ``S y``.

    Raises:
        ConvergenceError, ResolventError: an inner solver failed.
        MapRangeError: T or S left the set.
    """
    _expect(x, Point, 'x')
    if not contains(p.C, x):
        raise ValueError(f'Iterate {x} is not a point of the set')
    space = p.space
    a_k, b_k, g_k = s.weights(k)

    u, report = compute_resolvent(ResolventQuery(p.f, p.A, p.C, s.r_k(k), x))
    y, res_y = _forward_projection(p.C, p.A, x, s.tau)
    z, res_z = _forward_projection(p.C, p.A, u, s.tau)
    tz = apply_map(p.T, z, p.C)
    sy = apply_map(p.S, y, p.C)

    combined = (a_k * duality_coords(x.coords, space)
                + b_k * duality_coords(tz.coords, space)
                + g_k * duality_coords(sy.coords, space))
    x_next, res_x = generalized_projection_with_residual(
        p.C, Point(inverse_duality_coords(combined, space), space))

    step_norm = float(norm_coords(x_next.coords - x.coords, space))
    gaps = (None, None, None)
    if p.reference_solution is not None:
        ref = p.reference_solution.coords
        gaps = tuple(float(lyapunov_coords(ref, v.coords, space)) for v in (x, y, z))
    logger.debug(f'k={k}: step {step_norm:.3e}, resolvent violation {report.max_violation:.3e}')
    record = IterationRecord(
        k, x, u, y, z, x_next, step_norm, *gaps, report.max_violation, (res_y, res_z, res_x))
    return x_next, record


def _stopped(record: IterationRecord, stop_tol: float, phi_tol: Optional[float]) -> Optional[SolveStatus]:
    if record.step_norm <= stop_tol:
        return SolveStatus.CONVERGED
    if phi_tol is not None and record.phi_gap is not None and record.phi_gap <= phi_tol:
        return SolveStatus.REFERENCE_REACHED
    return None


def solve(
        p: ProblemInstance,
        s: Schedule,
        x1: Point,
        stop_tol: Optional[float] = None,
        max_iters: Optional[int] = None,
        phi_tol: Optional[float] = None,
        validate: bool = True
) -> SolveResult:
    """
    Iterate :func:`step` from ``x1`` until the step norm is at most ``stop_tol``
    (status ``converged``), the φ-gap to the reference solution is at most ``phi_tol``
    (status ``reference_reached``) or ``max_iters`` iterations have run. Inner solver
    failures end the run with status ``inner_failure`` and the trace so far.

    Raises:
        ScheduleError: the schedule fails condition (i), (iii) or (iv).
        ValueError: ``x1`` is not a point of the set.
    """
    stop_tol = config.resolve(stop_tol, config.STOP_TOL)
    max_iters = config.resolve(max_iters, config.MAX_ITERS)
    if max_iters < 1:
        raise ValueError(f'max_iters must be positive, got {max_iters}')
    _expect(x1, Point, 'x1')
    if not contains(p.C, x1):
        raise ValueError(f'Infeasible start: {x1} is not a point of the set')
    if validate:
        enforce_schedule(validate_schedule(s, p.A.alpha, p.space.c))
    if p.reference_solution is not None:
        domination = check_norm_domination(p.A, p.reference_solution, p.C)
        if domination.status == FAIL:
            logger.warning(f'||Ax|| <= ||Ax - Au|| fails at {domination.witness} (margin {domination.margin:.3e})')

    logger.info(f'solve: x1={x1.tolist()}, stop_tol={stop_tol}, max_iters={max_iters}')
    trace = []
    x = x1
    for k in range(1, max_iters + 1):
        try:
            x_next, record = step(p, s, k, x)
        except (ConvergenceError, ResolventError, MapRangeError) as err:
            logger.error(f'Inner failure at k={k}: {err}')
            return SolveResult(SolveStatus.INNER_FAILURE, x, trace, str(err))
        trace.append(record)
        x = x_next
        status = _stopped(record, stop_tol, phi_tol)
        if status is not None:
            logger.info(f'solve: {status.value} after {k} iterations')
            return SolveResult(status, x, trace)
    logger.info(f'solve: stopped at max_iters={max_iters}, last step {trace[-1].step_norm:.3e}')
    return SolveResult(SolveStatus.MAX_ITERS, x, trace)


def solve_corollary(
        p: ProblemInstance,
        s: Schedule,
        x1: Point,
        stop_tol: Optional[float] = None,
        max_iters: Optional[int] = None,
        phi_tol: Optional[float] = None
) -> SolveResult:
    """
    :func:`solve` with :math:`f \\equiv 0` and :math:`T = I`; the resolvent becomes the
    resolvent of the variational inequality alone. The ``f`` and ``T`` of ``p`` are ignored.
    """
    reduced = dataclasses.replace(p, f=Bifunction.zero(), T=FixedPointMap.identity(p.space))
    return solve(reduced, s, x1, stop_tol, max_iters, phi_tol)


def solve_korpelevich(
        A: MonotoneOperator,
        C: FeasibleSet,
        tau: float,
        x1: Point,
        stop_tol: Optional[float] = None,
        max_iters: Optional[int] = None
) -> SolveResult:
    """
    Classical two-step extragradient method in a euclidean space:

    .. math::
        y^k = P_C(x^k - \\tau A x^k), \\qquad x^{k+1} = P_C(x^k - \\tau A y^k).
    """
    _expect(x1, Point, 'x1')
    if not x1.space.is_euclidean:
        raise ValueError('The classical extragradient method needs a euclidean space')
    if not tau > 0:
        raise ValueError(f'tau must be positive, got {tau}')
    if not contains(C, x1):
        raise ValueError(f'Infeasible start: {x1} is not a point of the set')
    stop_tol = config.resolve(stop_tol, config.STOP_TOL)
    max_iters = config.resolve(max_iters, config.MAX_ITERS)
    space = x1.space

    trace = []
    x = x1
    for k in range(1, max_iters + 1):
        y = metric_projection(C, Point(duality_coords(x.coords, space) - tau * A.coords(x.coords), space))
        x_next = metric_projection(C, Point(x.coords - tau * A.coords(y.coords), space))
        step_norm = float(norm_coords(x_next.coords - x.coords, space))
        trace.append(IterationRecord(k, x, None, y, None, x_next, step_norm, None, None, None, 0.0, (0.0, 0.0)))
        x = x_next
        if step_norm <= stop_tol:
            return SolveResult(SolveStatus.CONVERGED, x, trace)
    return SolveResult(SolveStatus.MAX_ITERS, x, trace)
