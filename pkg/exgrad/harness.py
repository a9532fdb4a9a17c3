"""
Experiment files, trace output, table reproduction, hypothesis reports and rate estimates.

An experiment is a single JSON document::

    {"space": ..., "set": ..., "bifunction": ..., "operator": ..., "mapT": ..., "mapS": ...,
     "schedule": ..., "x1": [...], "reference_solution": [...],
     "max_iters": 100, "stop_tol": 0, "method": "extragradient"}

``method`` is ``extragradient`` (default), ``corollary`` or ``korpelevich``; the classical
method only uses the ``tau`` of the schedule.
"""
import json
import logging
import math
import os
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import jax.numpy as jnp
import pandas as pd
from scipy import stats

from . import config
from .equilibrium import check_bifunction_axioms
from .math_utils import (
    FAIL,
    PASS,
    CheckResult,
    ExperimentError,
    RateEstimationError,
)
from .operators import check_norm_domination, check_relatively_nonexpansive, estimate_alpha
from .sets import contains
from .solvers import (
    ProblemInstance,
    Schedule,
    SolveResult,
    SolveStatus,
    enforce_schedule,
    solve,
    solve_corollary,
    solve_korpelevich,
    validate_schedule,
)
from .space import Point

logger = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')
PRESETS = {
    'paper-35': ('paper-example.json', [3.5]),
    'paper-neg4': ('paper-example.json', [-4.0]),
    'corollary-demo': ('corollary-demo.json', None),
    'korpelevich-demo': ('korpelevich-demo.json', None),
}
""" Named presets: shipped file and start point override. """

TRACE_COLUMNS = ['k', 'x', 'u', 'y', 'z', 'step_norm', 'phi_gap', 'resolvent_violation']
TABLE_ROWS = (1, 2, 3, 45, 46, 47, 98, 99, 100)
RATE_MIN_POINTS = 10

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MAX_ITERS = 2
EXIT_INNER_FAILURE = 3
EXIT_CHECK_FAILED = 4

ERRATUM_NOTE = (
    'x^k follows the stated schedules, which give x^(k+1) = (79/144 + 25/(144k)) x^k. '
    'The reference column evaluates the closed form (79/144 - 16/(304k)) x^k published with this '
    'example; it does not follow from the schedules and is shown for comparison only.')

"""
Fit of :math:`\\log(\\text{step norm})` against k on the tail of a trace. ``window`` is the
``(first, last)`` iteration of the fit.
"""
RateEstimate = namedtuple('RateEstimate', ['geometric_ratio', 'r_squared', 'window'])

""" Outcome of :func:`run`: the solve result, the written files and the summary. """
RunOutcome = namedtuple('RunOutcome', ['result', 'trace_path', 'summary_path', 'summary'])


class Method(str, Enum):
    EXTRAGRADIENT = 'extragradient'
    COROLLARY = 'corollary'
    KORPELEVICH = 'korpelevich'


@dataclass
class ExperimentSpec:
    """
    A loaded experiment.

    Args:
        - problem: the problem instance.
        - schedule: parameter sequences (only ``tau`` is used by the classical method).
        - x1: starting point.
        - max_iters, stop_tol: stopping rule.
        - outputs: file names by kind; ``trace`` is the trace CSV.
        - method: which solver to run.
        - diagnostics: schedule conditions computed on load.
    """
    problem: ProblemInstance
    schedule: Schedule
    x1: Point
    max_iters: int = config.MAX_ITERS
    stop_tol: float = config.STOP_TOL
    outputs: Dict[str, str] = field(default_factory=dict)
    method: Method = Method.EXTRAGRADIENT
    name: str = ''
    path: Optional[str] = None
    diagnostics: List[CheckResult] = field(default_factory=list)

    def solve(self) -> SolveResult:
        if self.method is Method.KORPELEVICH:
            return solve_korpelevich(
                self.problem.A, self.problem.C, self.schedule.tau, self.x1, self.stop_tol, self.max_iters)
        runner = solve_corollary if self.method is Method.COROLLARY else solve
        return runner(self.problem, self.schedule, self.x1, self.stop_tol, self.max_iters)


def preset_path(name: str) -> str:
    """ Path of a shipped preset file, by preset name or file name. """
    if name in PRESETS:
        name = PRESETS[name][0]
    path = os.path.join(PRESET_DIR, name if name.endswith('.json') else f'{name}.json')
    if not os.path.exists(path):
        raise ExperimentError(f'Unknown preset {name!r}; known presets: {sorted(PRESETS)}')
    return path


def _read_document(path: str) -> dict:
    try:
        with open(path, 'r') as fh:
            text = fh.read()
    except OSError as err:
        raise ExperimentError(f'Cannot read experiment file {path}: {err}', path=path) from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ExperimentError(
            f'{path}:{err.lineno}:{err.colno}: {err.msg}', path=path, line=err.lineno, column=err.colno) from err
    if not isinstance(data, dict):
        raise ExperimentError(f'{path}: the top level must be an object', path=path)
    return data


def load_experiment(
        path: str,
        validate: bool = True,
        x1: Optional[Sequence[float]] = None,
        max_iters: Optional[int] = None,
        stop_tol: Optional[float] = None
) -> ExperimentSpec:
    """
    Parse and validate an experiment file. Keyword arguments override the file fields.
    With ``validate`` the schedule conditions are enforced (the classical method only
    needs ``tau > 0``); without it they are computed and kept in ``diagnostics``.

    Raises:
        ExperimentError: unreadable or malformed file, bad component, infeasible start.
        ScheduleError: a hard schedule condition fails.
    """
    data = _read_document(path)
    try:
        problem = ProblemInstance.from_dict(data)
        schedule = Schedule.from_dict(data['schedule'])
        method = Method(data.get('method', 'extragradient'))
        start = problem.space.point(x1 if x1 is not None else data['x1'])
    except (KeyError, TypeError, ValueError) as err:
        missing = f'missing field {err}' if isinstance(err, KeyError) else str(err)
        raise ExperimentError(f'{path}: {missing}', path=path) from err
    if not contains(problem.C, start):
        raise ExperimentError(f'{path}: infeasible start {start.tolist()} is not a point of the set', path=path)

    diagnostics = validate_schedule(schedule, problem.A.alpha, problem.space.c)
    if validate:
        if method is Method.KORPELEVICH:
            if not schedule.tau > 0:
                raise ExperimentError(f'{path}: tau must be positive, got {schedule.tau}', path=path)
        else:
            enforce_schedule(diagnostics)

    spec = ExperimentSpec(
        problem, schedule, start,
        max_iters=int(config.resolve(max_iters, data.get('max_iters', config.MAX_ITERS))),
        stop_tol=float(config.resolve(stop_tol, data.get('stop_tol', config.STOP_TOL))),
        outputs=dict(data.get('outputs', {})),
        method=method,
        name=data.get('name', os.path.splitext(os.path.basename(path))[0]),
        path=path,
        diagnostics=diagnostics,
    )
    logger.info(f'loaded {spec.name}: method {method.value}, x1={start.tolist()}')
    return spec


def load_preset(name: str, **overrides) -> ExperimentSpec:
    """ :func:`load_experiment` on a named preset, with the preset's start point. """
    if name not in PRESETS:
        raise ExperimentError(f'Unknown preset {name!r}; known presets: {sorted(PRESETS)}')
    filename, start = PRESETS[name]
    if start is not None and overrides.get('x1') is None:
        overrides['x1'] = start
    spec = load_experiment(preset_path(filename), **overrides)
    spec.name = name
    return spec


def exit_code(status: SolveStatus) -> int:
    return {
        SolveStatus.CONVERGED: EXIT_OK,
        SolveStatus.REFERENCE_REACHED: EXIT_OK,
        SolveStatus.MAX_ITERS: EXIT_MAX_ITERS,
        SolveStatus.INNER_FAILURE: EXIT_INNER_FAILURE,
    }[SolveStatus(status)]


def trace_frame(result: SolveResult) -> pd.DataFrame:
    """ The trace in the CSV column layout. """
    return result.to_dataframe()[TRACE_COLUMNS]


def write_trace(result: SolveResult, path: str) -> str:
    trace_frame(result).to_csv(path, index=False, float_format='%.17g', na_rep='')
    logger.info(f'trace written to {path}')
    return path


def summary_path_for(trace_path: str) -> str:
    return os.path.splitext(trace_path)[0] + '.summary.json'


def summarize(spec: ExperimentSpec, result: SolveResult) -> dict:
    try:
        rate = estimate_rate(trace_frame(result))._asdict()
    except RateEstimationError as err:
        logger.info(f'no rate estimate: {err}')
        rate = None
    return {
        'name': spec.name,
        'method': spec.method.value,
        'status': result.status.value,
        'iterations': result.iterations,
        'final': result.final.tolist(),
        'last_step_norm': result.trace[-1].step_norm if result.trace else None,
        'message': result.message,
        'rate': rate,
    }


def run(spec: ExperimentSpec, out: Optional[str] = None) -> RunOutcome:
    """
    Solve ``spec`` and write the trace CSV to ``out`` (or ``outputs["trace"]``) with a
    summary JSON beside it. Without any output path nothing is written.
    """
    result = spec.solve()
    summary = summarize(spec, result)
    trace_path = out or spec.outputs.get('trace')
    summary_path = None
    if trace_path:
        write_trace(result, trace_path)
        summary_path = summary_path_for(trace_path)
        with open(summary_path, 'w') as fh:
            json.dump(summary, fh, indent=2)
        logger.info(f'summary written to {summary_path}')
    return RunOutcome(result, trace_path, summary_path, summary)


def run_many(
        specs: Sequence[ExperimentSpec],
        outs: Optional[Sequence[Optional[str]]] = None,
        workers: Optional[int] = None
) -> List[RunOutcome]:
    """
    Run independent experiments in a thread pool. Each experiment owns its output files,
    so ``outs`` must not repeat a path.
    """
    outs = list(outs) if outs is not None else [None] * len(specs)
    if len(outs) != len(specs):
        raise ValueError(f'Got {len(specs)} experiments and {len(outs)} output paths')
    named = [o for o in outs if o]
    if len(set(named)) != len(named):
        raise ValueError('Output paths of concurrent experiments must be distinct')
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, specs, outs))


def _recurrence_reference(x1: float, k: int) -> float:
    value = x1
    for j in range(1, k):
        value *= 79.0 / 144.0 - 16.0 / (304.0 * j)
    return value


def reproduce(preset: str) -> str:
    """
    Run a preset and format ``k, x^k, y^k, z^k`` for the iterations 1, 2, 3, 45, 46, 47,
    98, 99 and 100 that exist in the trace. Scalar presets get a reference column with
    the closed-form recurrence published with the example, and a note on the difference.
    """
    spec = load_preset(preset)
    result = spec.solve()
    frame = trace_frame(result).set_index('k')
    rows = [k for k in TABLE_ROWS if k in frame.index]
    table = frame.loc[rows, ['x', 'y', 'z']].rename(columns={'x': 'x^k', 'y': 'y^k', 'z': 'z^k'})
    scalar = spec.problem.space.dim == 1 and spec.method is Method.EXTRAGRADIENT
    if scalar:
        x1 = float(spec.x1.coords[0])
        table['reference x^k'] = [f'{_recurrence_reference(x1, k):.17g}' for k in rows]
    text = f'{spec.name}: status {result.status.value}, {result.iterations} iterations\n'
    text += table.fillna('').reset_index().to_string(index=False)
    if scalar:
        text += f'\n\n{ERRATUM_NOTE}'
    return text


def _read_trace(trace: Union[str, pd.DataFrame]) -> pd.DataFrame:
    if isinstance(trace, pd.DataFrame):
        return trace
    try:
        return pd.read_csv(trace, dtype={'x': str, 'u': str, 'y': str, 'z': str})
    except (OSError, pd.errors.ParserError) as err:
        raise RateEstimationError(f'Cannot read trace {trace}: {err}') from err


def estimate_rate(trace: Union[str, pd.DataFrame]) -> RateEstimate:
    """
    Least-squares fit of :math:`\\log(\\text{step norm})` against k over the tail of a
    trace (the last half of the positive step norms, at least 10 of them). The geometric
    ratio is the exponential of the slope.

    Raises:
        RateEstimationError: fewer than 10 positive step norms.
    """
    frame = _read_trace(trace)
    residuals = pd.to_numeric(frame['step_norm'], errors='coerce')
    mask = (residuals > 0) & residuals.map(math.isfinite)
    k = frame['k'][mask].to_numpy(dtype=float)
    values = residuals[mask].to_numpy(dtype=float)
    if len(values) < RATE_MIN_POINTS:
        raise RateEstimationError(f'too few positive residuals ({len(values)} < {RATE_MIN_POINTS})')
    window = max(RATE_MIN_POINTS, len(values) // 2)
    k, values = k[-window:], values[-window:]
    fit = stats.linregress(k, [math.log(v) for v in values])
    ratio = math.exp(fit.slope)
    if not 0 < ratio < 1:
        logger.warning(f'estimated geometric ratio {ratio:.4f} is not in (0, 1)')
    return RateEstimate(ratio, fit.rvalue ** 2, (int(k[0]), int(k[-1])))


def check(
        path: str,
        samples: Optional[int] = None
) -> List[CheckResult]:
    """
    Consolidated hypothesis report of an experiment: schedule conditions, bifunction
    axioms, relative nonexpansiveness of T and S, the sampled α of A against the declared
    one, and norm domination when a reference solution is given.
    """
    spec = load_experiment(path, validate=False)
    samples = config.resolve(samples, config.CHECK_SAMPLES)
    p = spec.problem
    results = list(spec.diagnostics)
    results += check_bifunction_axioms(p.f, p.C, samples)
    for label, mapping in (('T', p.T), ('S', p.S)):
        try:
            found = check_relatively_nonexpansive(mapping, p.C, samples)
        except ValueError as err:
            found = [CheckResult('fixed points', FAIL, float('nan'), None, str(err))]
        results += [r._replace(name=f'{label}: {r.name}') for r in found]

    estimate = estimate_alpha(p.A, p.C, samples)
    margin = estimate - p.A.alpha + config.CHECK_TOL
    results.append(CheckResult(
        'declared α <= sampled α', PASS if margin >= 0 else FAIL, margin, None,
        f'declared {p.A.alpha:.6g}, sampled {estimate:.6g}'))
    if p.reference_solution is not None:
        results.append(check_norm_domination(p.A, p.reference_solution, p.C, samples))
    return results


def check_passed(results: Sequence[CheckResult]) -> bool:
    return not any(r.status == FAIL for r in results)


def format_report(results: Sequence[CheckResult]) -> str:
    frame = pd.DataFrame({
        'check': [r.name for r in results],
        'status': [r.status for r in results],
        'margin': [r.margin for r in results],
        'detail': [r.detail for r in results],
        'witness': [witness_text(r.witness) for r in results],
    })
    return frame.to_string(index=False)


def witness_text(witness) -> str:
    """ Human-readable witness: a point, a coordinate array or a tuple of them. """
    if witness is None:
        return ''
    if isinstance(witness, Point):
        return str(witness.tolist())
    if isinstance(witness, tuple):
        return ', '.join(witness_text(w) for w in witness)
    return str(jnp.ravel(jnp.asarray(witness)).tolist())
