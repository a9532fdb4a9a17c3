from setup_tests import *
from exgrad.math_utils import ConvergenceError, uniform_points
from exgrad.sets import *
from exgrad.sets import generalized_projection_with_residual
from exgrad.space import SpaceDescriptor, lp_norm, duality_coords, lyapunov_coords


def grid_projection(x, space, lower=-1.0, upper=1.0):
    """ Two-stage grid minimizer of ||y||^2 - 2<Jx, y> over a square box. """
    jx = duality_coords(x, space)

    def objective(ys):
        return jax.vmap(lambda y: lp_norm(y, space.p) ** 2)(ys) - 2.0 * ys @ jx

    coarse = jnp.linspace(lower, upper, 201)
    grid = jnp.stack(jnp.meshgrid(coarse, coarse, indexing='ij'), axis=-1).reshape(-1, 2)
    best = grid[jnp.argmin(objective(grid))]
    offsets = jnp.linspace(-0.02, 0.02, 401)
    axes = [jnp.clip(best[i] + offsets, lower, upper) for i in range(2)]
    grid = jnp.stack(jnp.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, 2)
    values = objective(grid)
    return grid[jnp.argmin(values)], float(jnp.min(values))


class TestFeasibleSets(unittest.TestCase):

    def setUp(self) -> None:
        self.e2 = SpaceDescriptor.euclidean(2)
        self.lp = SpaceDescriptor.lp(2, 1.5, math.sqrt(0.5))
        self.box = Box([-1.0, -1.0], [1.0, 1.0])

    def test_contains(self):
        self.assertTrue(contains(self.box, self.e2.point([1.0, -1.0])))
        self.assertTrue(contains(self.box, self.e2.point([1.0 + 1e-12, 0.0])))
        self.assertFalse(contains(self.box, self.e2.point([1.1, 0.0])))
        self.assertTrue(contains(self.box, self.e2.point([1.05, 0.0]), tol=0.1))
        half = Halfspace([1.0, 1.0], 1.0)
        self.assertTrue(contains(half, self.e2.point([0.5, 0.5])))
        self.assertFalse(contains(half, self.e2.point([1.0, 1.0])))
        self.assertTrue(contains(WholeSpace(2), self.e2.point([1e6, -1e6])))
        with self.assertRaises(ValueError):
            contains(self.box, self.e2.point([0.0, 0.0]), tol=-1.0)
        with self.assertRaises(ValueError):
            contains(self.box, SpaceDescriptor.euclidean(3).zero())

    def test_invalid_sets(self):
        with self.assertRaises(ValueError):
            Box([1.0], [0.0])
        with self.assertRaises(ValueError):
            Box([0.0, 0.0], [1.0])
        with self.assertRaises(ValueError):
            Halfspace([0.0, 0.0], 1.0)
        with self.assertRaises(ValueError):
            FeasibleSet.from_dict({'type': 'ball'}, 2)

    def test_from_dict(self):
        box = FeasibleSet.from_dict({'type': 'box', 'lower': [0.0, None], 'upper': None}, 2)
        self.assertEqual(box.lower.tolist(), [0.0, -jnp.inf])
        self.assertTrue(bool(jnp.all(jnp.isinf(box.upper))))
        self.assertEqual(box.corners().shape, (0, 2))
        self.assertEqual(box.to_dict(), {'type': 'box', 'lower': [0.0, None], 'upper': [None, None]})
        half = FeasibleSet.from_dict({'type': 'halfspace', 'normal': [1.0, 2.0], 'offset': 3.0}, 2)
        self.assertEqual(half.to_dict(), {'type': 'halfspace', 'normal': [1.0, 2.0], 'offset': 3.0})
        self.assertIsInstance(FeasibleSet.from_dict({'type': 'whole'}, 3), WholeSpace)
        self.assertEqual(self.box.corners().shape, (4, 2))

    def test_metric_projection(self):
        self.assertEqual(metric_projection(self.box, self.e2.point([2.0, -0.5])).tolist(), [1.0, -0.5])
        half = Halfspace([1.0, 1.0], 0.0)
        projected = metric_projection(half, self.e2.point([1.0, 1.0]))
        self.assertTrue(jnp.allclose(projected.coords, 0.0, atol=1e-15))
        inside = self.e2.point([-1.0, -3.0])
        self.assertEqual(metric_projection(half, inside).tolist(), inside.tolist())
        with self.assertRaises(ValueError):
            metric_projection(self.box, self.lp.point([2.0, 2.0]))

    def test_generalized_projection_exact_paths(self):
        x = self.e2.point([2.0, -0.5])
        self.assertEqual(generalized_projection(self.box, x).tolist(), metric_projection(self.box, x).tolist())
        half = Halfspace([1.0, 2.0], 1.0)
        x = self.e2.point([3.0, 1.0])
        self.assertTrue(jnp.allclose(generalized_projection(half, x).coords,
                                     metric_projection(half, x).coords, rtol=0, atol=0))
        y = self.lp.point([5.0, -7.0])
        self.assertEqual(generalized_projection(WholeSpace(2), y).tolist(), [5.0, -7.0])
        inside = self.lp.point([0.25, -0.5])
        z, residual = generalized_projection_with_residual(self.box, inside)
        self.assertEqual(z.tolist(), inside.tolist())
        self.assertEqual(residual, 0.0)
        line = SpaceDescriptor.lp(1, 1.5, math.sqrt(0.5))
        self.assertEqual(generalized_projection(Box([-4.0], [4.0]), line.point([6.0])).tolist(), [4.0])

    def test_generalized_projection_symmetric_corner(self):
        z = generalized_projection(self.box, self.lp.point([2.0, 2.0]))
        self.assertTrue(jnp.allclose(z.coords, 1.0, atol=1e-8))

    def test_generalized_projection_matches_grid(self):
        x = self.lp.point([2.0, 0.3])
        z = generalized_projection(self.box, x)
        best, best_value = grid_projection(x.coords, self.lp)
        self.assertTrue(jnp.allclose(z.coords, best, atol=1e-3))
        value = lp_norm(z.coords, self.lp.p) ** 2 - 2.0 * jnp.dot(duality_coords(x.coords, self.lp), z.coords)
        self.assertLessEqual(float(value), best_value + 1e-9)
        self.assertLessEqual(projection_residual(self.box, x, z), 1e-6)
        self.assertNotAlmostEqual(float(z.coords[1]), 0.3, places=3)

    def test_generalized_projection_halfspace(self):
        half = Halfspace([1.0, 1.0], 1.0)
        x = self.lp.point([3.0, 0.5])
        z = generalized_projection(half, x)
        self.assertTrue(contains(half, z))
        self.assertAlmostEqual(float(jnp.sum(z.coords)), 1.0, places=8)
        self.assertLessEqual(projection_residual(half, x, z), 1e-6)

    def test_generalized_projection_budget(self):
        with self.assertRaises(ConvergenceError) as ctx:
            generalized_projection(self.box, self.lp.point([2.0, 0.3]), tol=1e-15, max_iter=1)
        self.assertIsNotNone(ctx.exception.best)
        self.assertTrue(contains(self.box, ctx.exception.best))
        self.assertGreater(ctx.exception.residual, 1e-15)
        with self.assertRaises(ValueError):
            generalized_projection(self.box, self.lp.point([2.0, 0.3]), tol=0.0)

    def test_projection_residual(self):
        x = self.e2.point([2.0, 0.0])
        self.assertEqual(projection_residual(self.box, x, self.e2.point([1.0, 0.0])), 0.0)
        self.assertGreater(projection_residual(self.box, x, self.e2.point([0.0, 0.0])), 0.5)
        with self.assertRaises(ValueError):
            projection_residual(self.box, x, x)

    def test_sample(self):
        points = self.box.sample(50)
        self.assertEqual(points.shape, (50, 2))
        self.assertTrue(bool(jnp.all(jnp.abs(points) <= 1.0)))
        self.assertTrue(bool(jnp.array_equal(points, self.box.sample(50))))
        seeded = Halfspace([1.0, 0.0], 0.0).sample(30, key=seeded_key(3))
        self.assertTrue(bool(jnp.all(seeded[:, 0] <= 1e-12)))


class TestGeneralizedProjectionProperties(unittest.TestCase):

    def setUp(self) -> None:
        self.lp = SpaceDescriptor.lp(4, 1.5, math.sqrt(0.5))
        self.e4 = SpaceDescriptor.euclidean(4)
        self.sets = [Box([-1.0] * 4, [1.0] * 4), Halfspace([1.0, 1.0, 1.0, 1.0], 1.0)]
        self.xs = uniform_points(seeded_key(30), 20, -3.0 * jnp.ones(4), 3.0 * jnp.ones(4))

    def test_three_point_inequality(self):
        for set in self.sets:
            ws = set.sample(25, key=seeded_key(31))
            for coords in self.xs:
                x = self.lp.point(coords)
                z = generalized_projection(set, x)
                self.assertLessEqual(projection_residual(set, x, z), 1e-6)
                phi_wz = jax.vmap(lambda w: lyapunov_coords(w, z.coords, self.lp))(ws)
                phi_wx = jax.vmap(lambda w: lyapunov_coords(w, x.coords, self.lp))(ws)
                slack = phi_wz + lyapunov_coords(z.coords, x.coords, self.lp) - phi_wx
                self.assertLessEqual(float(jnp.max(slack)), 1e-6, (set.to_dict(), x.tolist()))

    def test_idempotent(self):
        for space in (self.lp, self.e4):
            for set in self.sets:
                for coords in self.xs[:10]:
                    z = generalized_projection(set, space.point(coords))
                    self.assertTrue(contains(set, z))
                    again = generalized_projection(set, z)
                    self.assertTrue(jnp.allclose(again.coords, z.coords, atol=1e-8), (space.kind, set.to_dict()))


if __name__ == '__main__':
    unittest.main()
