from setup_tests import *
import dataclasses
from exgrad.equilibrium import Bifunction
from exgrad.math_utils import FAIL, PASS, WARN, ScheduleError
from exgrad.operators import FixedPointMap, MonotoneOperator
from exgrad.sets import Box, contains
from exgrad.solvers import *
from exgrad.solvers import CONDITION_FLOOR, CONDITION_LIMINF, CONDITION_STEP, CONDITION_WEIGHTS, enforce_schedule
from exgrad.space import SpaceDescriptor


def recurrence(x1: float, n: int) -> list:
    """ x_{k+1} = (79/144 + 25/(144 k)) x_k for the shipped one-dimensional example. """
    values = [x1]
    for k in range(1, n + 1):
        values.append((79 / 144 + 25 / (144 * k)) * values[-1])
    return values


def demo_problem():
    space = SpaceDescriptor.euclidean(2)
    problem = ProblemInstance(
        space, Box([-1.0, -1.0], [1.0, 1.0]), Bifunction.zero(),
        MonotoneOperator.linear(space, [[1.0, 0.0], [0.0, 2.0]]),
        FixedPointMap.identity(space), FixedPointMap.identity(space), space.zero())
    third = ParametricSequence.constant(1 / 3)
    schedule = Schedule(third, third, third, ParametricSequence.constant(1.0), 0.2, 1.0)
    return problem, schedule, space.point([0.9, -0.7])


class TestParametricSequence(unittest.TestCase):

    def test_values(self):
        alpha = ParametricSequence.affine_reciprocal(1 / 3, 1 / 4)
        self.assertAlmostEqual(alpha(1), 7 / 12, places=15)
        self.assertAlmostEqual(alpha(4), 1 / 3 + 1 / 16, places=15)
        self.assertEqual(alpha.limit, 1 / 3)
        self.assertAlmostEqual(alpha.infimum, 1 / 3, places=15)
        self.assertAlmostEqual(ParametricSequence.affine_reciprocal(0.5, -1 / 6).infimum, 1 / 3, places=15)
        self.assertTrue(jnp.allclose(alpha.values(3), jnp.array([alpha(1), alpha(2), alpha(3)]), rtol=1e-15))
        self.assertEqual(ParametricSequence.constant(0.2)(1000), 0.2)
        with self.assertRaises(ValueError):
            alpha(0)
        with self.assertRaises(ValueError):
            ParametricSequence('constant', 1.0, 1.0)

    def test_dict_form(self):
        self.assertEqual(ParametricSequence.from_dict(0.5), ParametricSequence.constant(0.5))
        data = {'type': 'affine_reciprocal', 'base': 0.5, 'slope': -0.25}
        self.assertEqual(ParametricSequence.from_dict(data).to_dict(), data)
        self.assertEqual(ParametricSequence.from_dict({'type': 'constant', 'value': 2}).to_dict(),
                         {'type': 'constant', 'value': 2.0})
        schedule = paper_schedule()
        self.assertEqual(Schedule.from_dict(schedule.to_dict()), schedule)


class TestValidateSchedule(unittest.TestCase):

    def test_paper_schedule_passes(self):
        results = validate_schedule(paper_schedule(), 1.0, 1.0)
        self.assertEqual([r.name for r in results], [CONDITION_WEIGHTS, CONDITION_LIMINF, CONDITION_FLOOR, CONDITION_STEP])
        self.assertEqual([r.status for r in results], [PASS] * 4)
        enforce_schedule(results)

    def test_step_size_bound(self):
        results = validate_schedule(paper_schedule(tau=0.5), 1.0, 1.0)
        self.assertEqual(results[3].status, FAIL)
        with self.assertRaises(ScheduleError) as ctx:
            enforce_schedule(results)
        self.assertEqual(ctx.exception.condition, CONDITION_STEP)
        self.assertEqual(validate_schedule(paper_schedule(tau=0.2), 1.0, math.sqrt(0.5))[3].status, PASS)
        self.assertEqual(validate_schedule(paper_schedule(tau=0.26), 1.0, math.sqrt(0.5))[3].status, FAIL)

    def test_weights_must_sum_to_one(self):
        s = dataclasses.replace(paper_schedule(), alpha_k=ParametricSequence.affine_reciprocal(0.4, 0.25))
        results = validate_schedule(s, 1.0, 1.0)
        self.assertEqual(results[0].status, FAIL)
        with self.assertRaises(ScheduleError) as ctx:
            enforce_schedule(results)
        self.assertEqual(ctx.exception.condition, CONDITION_WEIGHTS)

    def test_resolvent_floor(self):
        s = dataclasses.replace(paper_schedule(), r_k=ParametricSequence.constant(0.01))
        self.assertEqual(validate_schedule(s, 1.0, 1.0)[2].status, FAIL)
        s = dataclasses.replace(paper_schedule(), a_floor=0.0)
        self.assertEqual(validate_schedule(s, 1.0, 1.0)[2].status, FAIL)

    def test_vanishing_weight_warns(self):
        s = dataclasses.replace(
            paper_schedule(),
            alpha_k=ParametricSequence.affine_reciprocal(1 / 3, 1 / 4),
            beta_k=ParametricSequence.affine_reciprocal(2 / 3, -1 / 4),
            gamma_k=ParametricSequence.constant(0.0))
        results = validate_schedule(s, 1.0, 1.0)
        self.assertEqual(results[0].status, PASS)
        self.assertEqual(results[1].status, WARN)
        with self.assertLogs('exgrad.solvers', level='WARNING'):
            enforce_schedule(results)

    def test_weights_leaving_unit_interval_late(self):
        s = dataclasses.replace(
            paper_schedule(),
            alpha_k=ParametricSequence.affine_reciprocal(1.000001, -0.01),
            beta_k=ParametricSequence.affine_reciprocal(-1e-6, 0.01),
            gamma_k=ParametricSequence.constant(0.0))
        self.assertGreater(s.beta_k(1000), 0.0)
        self.assertLess(s.beta_k(10 ** 6), 0.0)
        results = validate_schedule(s, 1.0, 1.0)
        self.assertEqual(results[0].status, FAIL)
        self.assertAlmostEqual(results[0].margin, -1e-6, places=9)
        with self.assertRaises(ScheduleError) as ctx:
            enforce_schedule(results)
        self.assertEqual(ctx.exception.condition, CONDITION_WEIGHTS)

    def test_weights_above_one_at_first_iteration(self):
        s = dataclasses.replace(
            paper_schedule(),
            alpha_k=ParametricSequence.affine_reciprocal(1 / 3, 3 / 4),
            beta_k=ParametricSequence.affine_reciprocal(1 / 2, -2 / 3))
        self.assertAlmostEqual(s.alpha_k.supremum, 13 / 12, places=12)
        self.assertAlmostEqual(s.beta_k.infimum, -1 / 6, places=12)
        results = validate_schedule(s, 1.0, 1.0, horizon=1)
        self.assertEqual(results[0].status, FAIL)
        self.assertAlmostEqual(results[0].margin, -1 / 6, places=9)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            validate_schedule(paper_schedule(), 0.0, 1.0)
        with self.assertRaises(ValueError):
            validate_schedule(paper_schedule(), 1.0, 1.5)


class TestExtragradientStep(unittest.TestCase):

    def setUp(self) -> None:
        self.problem = paper_problem()
        self.schedule = paper_schedule()
        self.space = self.problem.space

    def test_first_step(self):
        x2, record = step(self.problem, self.schedule, 1, self.space.point([3.5]))
        self.assertAlmostEqual(record.u.tolist()[0], 1.75, places=14)
        self.assertAlmostEqual(record.y.tolist()[0], 2.625, places=14)
        self.assertAlmostEqual(record.z.tolist()[0], 1.3125, places=14)
        self.assertAlmostEqual(x2.tolist()[0], 104 / 144 * 3.5, places=13)
        self.assertNotAlmostEqual(x2.tolist()[0], 1.7359, places=3)
        self.assertEqual(record.x_next.tolist(), x2.tolist())
        self.assertAlmostEqual(record.step_norm, 3.5 - 104 / 144 * 3.5, places=13)
        self.assertAlmostEqual(record.phi_gap, 12.25, places=13)
        self.assertAlmostEqual(record.phi_gap_y, 2.625 ** 2, places=13)
        self.assertAlmostEqual(record.phi_gap_z, 1.3125 ** 2, places=13)
        self.assertEqual(record.projection_residuals, (0.0, 0.0, 0.0))

    def test_first_step_from_lower_corner(self):
        x2, record = step(self.problem, self.schedule, 1, self.space.point([-4.0]))
        self.assertAlmostEqual(record.u.tolist()[0], -2.0, places=14)
        self.assertAlmostEqual(record.y.tolist()[0], -3.0, places=14)
        self.assertAlmostEqual(record.z.tolist()[0], -1.5, places=14)
        self.assertAlmostEqual(x2.tolist()[0], 104 / 144 * -4.0, places=13)

    def test_infeasible_iterate(self):
        with self.assertRaises(ValueError):
            step(self.problem, self.schedule, 1, self.space.point([5.0]))

    def test_hilbert_reduction(self):
        space = SpaceDescriptor.euclidean(2)
        A = MonotoneOperator.linear(space, [[1.0, 0.0], [0.0, 2.0]])
        C = Box([-1.0, -1.0], [1.0, 1.0])
        problem = ProblemInstance(space, C, Bifunction.zero(), A, FixedPointMap.identity(space),
                                  FixedPointMap.identity(space))
        s = Schedule(ParametricSequence.constant(1.0), ParametricSequence.constant(0.0),
                     ParametricSequence.constant(0.0), ParametricSequence.constant(1.0), 0.2, 1.0)
        x1 = space.point([0.9, -0.7])
        _, record = step(problem, s, 1, x1)
        baseline = solve_korpelevich(A, C, 0.2, x1, max_iters=1)
        self.assertTrue(bool(jnp.array_equal(record.y.coords, baseline.trace[0].y.coords)))


class TestSolve(unittest.TestCase):

    def setUp(self) -> None:
        self.problem = paper_problem()
        self.schedule = paper_schedule()
        self.space = self.problem.space

    def test_paper_trajectory(self):
        result = solve(self.problem, self.schedule, self.space.point([3.5]), stop_tol=0.0, max_iters=100)
        self.assertEqual(result.status, SolveStatus.MAX_ITERS)
        self.assertEqual(result.iterations, 100)
        expected = recurrence(3.5, 100)
        for record in result.trace:
            self.assertTrue(is_close(record.x.tolist()[0], expected[record.k - 1], rtol=1e-12), record.k)
            self.assertTrue(is_close(record.x_next.tolist()[0], expected[record.k], rtol=1e-12), record.k)
        self.assertTrue(is_close(result.final.tolist()[0], expected[100], rtol=1e-12))
        self.assertLess(abs(result.final.tolist()[0]), 1e-24)
        self.assertGreater(abs(result.final.tolist()[0]), 1e-26)

    def test_phi_gap_decreases(self):
        for x1 in (3.5, -4.0):
            result = solve(self.problem, self.schedule, self.space.point([x1]), stop_tol=0.0, max_iters=100)
            self.assertEqual(result.iterations, 100)
            gaps = [r.phi_gap for r in result.trace]
            for k, (a, b) in enumerate(zip(gaps, gaps[1:]), start=1):
                self.assertLessEqual(b, a + 1e-10, (x1, k))
            self.assertTrue(all(r.resolvent_violation <= 1e-9 for r in result.trace))

    def test_lower_corner_converges(self):
        result = solve(self.problem, self.schedule, self.space.point([-4.0]), stop_tol=0.0, max_iters=100)
        expected = recurrence(-4.0, 100)
        self.assertTrue(is_close(result.final.tolist()[0], expected[100], rtol=1e-12))
        self.assertLess(abs(result.final.tolist()[0]), 1e-24)

    def test_step_sandwich_and_feasibility(self):
        for x1 in (3.5, -4.0):
            result = solve(self.problem, self.schedule, self.space.point([x1]), stop_tol=0.0, max_iters=100)
            for record in result.trace:
                self.assertLessEqual(record.phi_gap_y, record.phi_gap + 1e-10, record.k)
                self.assertLessEqual(record.phi_gap_z, record.phi_gap + 1e-10, record.k)
                for point in (record.x, record.u, record.y, record.z, record.x_next):
                    self.assertTrue(contains(self.problem.C, point), (record.k, point))

    def test_demo_sandwich_and_feasibility(self):
        problem, schedule, x1 = demo_problem()
        result = solve_corollary(problem, schedule, x1)
        for record in result.trace:
            self.assertLessEqual(record.phi_gap_y, record.phi_gap + 1e-10, record.k)
            self.assertLessEqual(record.phi_gap_z, record.phi_gap + 1e-10, record.k)
            for point in (record.x, record.u, record.y, record.z):
                self.assertTrue(contains(problem.C, point), (record.k, point))

    def test_deterministic_trace(self):
        x1 = self.space.point([3.5])
        first = solve(self.problem, self.schedule, x1, stop_tol=0.0, max_iters=30)
        second = solve(self.problem, self.schedule, x1, stop_tol=0.0, max_iters=30)
        pd.testing.assert_frame_equal(first.to_dataframe(), second.to_dataframe(), check_exact=True)
        for a, b in zip(first.trace, second.trace):
            self.assertTrue(bool(jnp.array_equal(a.x_next.coords, b.x_next.coords)), a.k)
            self.assertEqual(a.step_norm, b.step_norm)
            self.assertEqual(a.resolvent_violation, b.resolvent_violation)

    def test_stop_rules(self):
        result = solve(self.problem, self.schedule, self.space.point([3.5]), stop_tol=1e-6)
        self.assertEqual(result.status, SolveStatus.CONVERGED)
        self.assertLessEqual(result.trace[-1].step_norm, 1e-6)
        self.assertGreater(result.trace[-2].step_norm, 1e-6)
        self.assertEqual(result.final.tolist(), result.trace[-1].x_next.tolist())
        by_gap = solve(self.problem, self.schedule, self.space.point([3.5]), stop_tol=0.0, phi_tol=1e-6)
        self.assertEqual(by_gap.status, SolveStatus.REFERENCE_REACHED)
        self.assertLessEqual(by_gap.trace[-1].phi_gap, 1e-6)
        self.assertGreater(by_gap.trace[-1].step_norm, 0.0)
        self.assertLess(by_gap.iterations, 100)
        both = solve(self.problem, self.schedule, self.space.point([3.5]), stop_tol=1e-3, phi_tol=1e-30)
        self.assertEqual(both.status, SolveStatus.CONVERGED)
        self.assertLessEqual(both.trace[-1].step_norm, 1e-3)

    def test_fixed_point_start(self):
        result = solve(self.problem, self.schedule, self.space.point([0.0]))
        self.assertEqual(result.status, SolveStatus.CONVERGED)
        self.assertEqual(result.iterations, 1)
        self.assertEqual(result.final.tolist(), [0.0])

    def test_invalid_runs(self):
        with self.assertRaises(ValueError):
            solve(self.problem, self.schedule, self.space.point([4.5]))
        with self.assertRaises(ValueError):
            solve(self.problem, self.schedule, self.space.point([1.0]), max_iters=0)
        with self.assertRaises(ScheduleError):
            solve(self.problem, paper_schedule(tau=0.5), self.space.point([1.0]))
        result = solve(self.problem, paper_schedule(tau=0.5), self.space.point([1.0]), max_iters=3, validate=False)
        self.assertEqual(result.iterations, 3)

    def test_inner_failure(self):
        escaping = FixedPointMap.custom(self.space, lambda x: x + 5.0, [])
        problem = dataclasses.replace(self.problem, T=escaping)
        result = solve(problem, self.schedule, self.space.point([3.5]))
        self.assertEqual(result.status, SolveStatus.INNER_FAILURE)
        self.assertEqual(result.iterations, 0)
        self.assertEqual(result.final.tolist(), [3.5])
        self.assertTrue(result.message)

    def test_lp_space_fixed_point(self):
        space = SpaceDescriptor.lp(2, 1.5, math.sqrt(0.5))
        problem = ProblemInstance(space, Box([-1.0, -1.0], [1.0, 1.0]), Bifunction.zero(),
                                  MonotoneOperator.zero(space), FixedPointMap.identity(space),
                                  FixedPointMap.identity(space))
        s = dataclasses.replace(demo_problem()[1], a_floor=1.0)
        result = solve(problem, s, space.point([0.5, -0.25]))
        self.assertEqual(result.status, SolveStatus.CONVERGED)
        self.assertTrue(jnp.allclose(result.final.coords, jnp.array([0.5, -0.25]), atol=1e-12))

    def test_trace_dataframe(self):
        result = solve(self.problem, self.schedule, self.space.point([3.5]), stop_tol=0.0, max_iters=5)
        df = result.to_dataframe()
        self.assertEqual(list(df.columns), [
            'k', 'x', 'u', 'y', 'z', 'x_next', 'step_norm', 'phi_gap', 'phi_gap_y', 'phi_gap_z',
            'resolvent_violation'])
        self.assertEqual(df['k'].tolist(), [1, 2, 3, 4, 5])
        self.assertEqual(df['x'][0], '3.5')
        self.assertEqual(float(df['u'][0]), 1.75)


class TestCorollaryAndBaseline(unittest.TestCase):

    def test_corollary_demo(self):
        problem, schedule, x1 = demo_problem()
        result = solve_corollary(problem, schedule, x1)
        self.assertEqual(result.status, SolveStatus.CONVERGED)
        self.assertLess(result.iterations, 200)
        self.assertLessEqual(float(jnp.max(jnp.abs(result.final.coords))), 1e-9)
        first = result.trace[0]
        self.assertTrue(jnp.allclose(first.x_next.coords, jnp.array([0.9 * 2.2 / 3, -0.7 * 0.6]), atol=1e-9))

    def test_corollary_ignores_f_and_T(self):
        problem, schedule, x1 = demo_problem()
        noisy = dataclasses.replace(problem, T=FixedPointMap.scaling(problem.space, 0.5),
                                    f=Bifunction.custom(lambda u, y: jnp.dot(y - u, y - u)))
        a = solve_corollary(noisy, schedule, x1, max_iters=3, stop_tol=0.0)
        b = solve_corollary(problem, schedule, x1, max_iters=3, stop_tol=0.0)
        self.assertTrue(bool(jnp.array_equal(a.final.coords, b.final.coords)))

    def test_korpelevich(self):
        space = SpaceDescriptor.euclidean(1)
        result = solve_korpelevich(MonotoneOperator.identity(space), Box([-4.0], [4.0]), 0.25, space.point([3.5]),
                                   max_iters=1)
        self.assertEqual(result.status, SolveStatus.MAX_ITERS)
        self.assertAlmostEqual(result.trace[0].y.tolist()[0], 2.625, places=15)
        self.assertAlmostEqual(result.final.tolist()[0], 2.84375, places=15)
        self.assertIsNone(result.trace[0].u)
        self.assertIsNone(result.trace[0].z)
        self.assertTrue(result.to_dataframe()['u'].isna().all())

    def test_korpelevich_demo_rate(self):
        problem, _, x1 = demo_problem()
        result = solve_korpelevich(problem.A, problem.C, 0.2, x1, stop_tol=0.0, max_iters=81)
        self.assertLessEqual(float(jnp.linalg.norm(result.final.coords)), 1e-6)
        self.assertTrue(jnp.allclose(result.trace[0].x_next.coords, jnp.array([0.9 * 0.84, -0.7 * 0.76]), rtol=1e-14))

    def test_korpelevich_rejects(self):
        lp = SpaceDescriptor.lp(2, 1.5, 0.7)
        with self.assertRaises(ValueError):
            solve_korpelevich(MonotoneOperator.zero(lp), Box([-1.0, -1.0], [1.0, 1.0]), 0.2, lp.zero())
        space = SpaceDescriptor.euclidean(1)
        with self.assertRaises(ValueError):
            solve_korpelevich(MonotoneOperator.identity(space), Box([-4.0], [4.0]), 0.0, space.zero())


class TestProblemInstance(unittest.TestCase):

    def test_from_dict_defaults(self):
        problem = ProblemInstance.from_dict({
            'space': {'kind': 'euclidean', 'dim': 2},
            'set': {'type': 'box', 'lower': [-1, -1], 'upper': [1, 1]},
            'operator': {'type': 'linear', 'matrix': [[1, 0], [0, 2]]},
        })
        self.assertEqual(problem.f.to_dict(), {'type': 'zero'})
        self.assertEqual(problem.T.to_dict(), {'type': 'identity'})
        self.assertEqual(problem.S.to_dict(), {'type': 'identity'})
        self.assertIsNone(problem.reference_solution)

    def test_round_trip_of_shipped_problem(self):
        document = paper_document()
        problem = ProblemInstance.from_dict(document)
        again = ProblemInstance.from_dict(problem.to_dict())
        self.assertEqual(again.to_dict(), problem.to_dict())
        self.assertEqual(problem.S.t, 2 / 9)

    def test_invalid(self):
        space = SpaceDescriptor.euclidean(1)
        problem = paper_problem()
        with self.assertRaises(ValueError):
            dataclasses.replace(problem, reference_solution=space.point([5.0]))
        with self.assertRaises(ValueError):
            dataclasses.replace(problem, C=Box([-1.0, -1.0], [1.0, 1.0]))


if __name__ == '__main__':
    unittest.main()
