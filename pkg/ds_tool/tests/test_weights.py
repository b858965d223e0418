"""Tests for ds_tool.analysis.weights."""

#pylint: disable=too-many-public-methods,import-error,too-few-public-methods,missing-docstring,unused-variable,multiple-imports
import unittest

import numpy as np

from ds_tool.analysis.dyadic import build_dyadic_system
from ds_tool.analysis.errors import ParameterError, WeightError
from ds_tool.analysis.measure import build_grid
from ds_tool.analysis.probes import make_b
from ds_tool.analysis.reflection import make_root_system
from ds_tool.analysis.weights import Family, Weight, a1_constant, ap_constant, \
        ball_family, bmo_norm, cube_family, default_family, make_weight, \
        median_value, orbit_closure, oscillation, reverse_holder, \
        rubio_de_francia, verify_inclusion, verify_wp


class TestCatalog(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid((-1, 1), 32, make_root_system('A1', 1.0))

    def test_constant_and_power_weights_are_radial(self):
        for expr in ('const:1', 'const:2.5', 'dunkl_power:0.5', 'dunkl_power:-0.3'):
            weight = make_weight(self.grid, expr)
            self.assertTrue(weight.radial, expr)
            self.assertEqual(weight.tag, expr)

    def test_shifted_power_weight_is_not_radial(self):
        weight = make_weight(self.grid, 'euclid_power:0.5@0.3')
        self.assertFalse(weight.radial)
        self.assertTrue(np.all(weight.values > 0))

    def test_invalid_expressions(self):
        for expr in ('const:x', 'euclid_power:1@0.1,0.2', 'rdf:nan', 'gaussian:1'):
            with self.assertRaises(ParameterError):
                make_weight(self.grid, expr)

    def test_weights_must_be_positive(self):
        with self.assertRaises(WeightError):
            Weight(self.grid, np.zeros(self.grid.n))
        with self.assertRaises(WeightError):
            Weight(self.grid, np.ones(3))

    def test_false_radial_claim_is_rejected(self):
        values = 1.0 + (self.grid.points[:, 0] > 0)
        with self.assertRaises(WeightError):
            Weight(self.grid, values, radial=True)

    def test_rubio_de_francia_weight_from_the_catalog(self):
        weight = make_weight(self.grid, 'rdf:one', p=2.0)
        self.assertEqual(weight.tag, 'rdf:one')
        self.assertTrue(np.all(weight.values >= 1.0))


class TestMuckenhoupt(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid((-1, 1), 32, make_root_system('A1', 1.0))
        cls.system = build_dyadic_system(cls.grid)
        cls.family = default_family(cls.grid, cls.system, count=100, seed=0)

    def test_constant_weight_has_constant_one(self):
        for p in (1.5, 2.0, 4.0):
            report = ap_constant(self.grid, make_weight(self.grid, 'const:3'), p,
                    self.family)
            self.assertAlmostEqual(report.estimate, 1.0, places=12)

    def test_constants_are_at_least_one(self):
        weight = make_weight(self.grid, 'euclid_power:0.5@0.3')
        report = ap_constant(self.grid, weight, 2.0, self.family)
        self.assertGreaterEqual(report.estimate, 1.0 - 1e-12)
        self.assertEqual(report.as_dict()['worst_member'], report.worst)

    def test_p_must_exceed_one(self):
        with self.assertRaises(ParameterError):
            ap_constant(self.grid, np.ones(self.grid.n), 1.0, self.family)

    def test_empty_family(self):
        with self.assertRaises(WeightError):
            ap_constant(self.grid, np.ones(self.grid.n), 2.0, Family('balls', [], {}))

    def test_families_concatenate(self):
        balls = ball_family(self.grid, count=20, seed=1)
        cubes = cube_family(self.system)
        self.assertEqual(len(balls + cubes), len(balls) + len(cubes))
        self.assertEqual((balls + cubes).kind, 'mixed')

    def test_explicit_balls(self):
        family = ball_family(self.grid, centers=[np.array([0.5])], radii=[0.1])
        self.assertEqual(len(family), 1)
        with self.assertRaises(ParameterError):
            ball_family(self.grid, metric='chebyshev')

    def test_inclusion_of_the_classes(self):
        weight = make_weight(self.grid, 'euclid_power:0.7@0.3')
        holds, report = verify_inclusion(self.grid, weight, 2.0, 3.0, self.family)
        self.assertTrue(holds, report)
        with self.assertRaises(ParameterError):
            verify_inclusion(self.grid, weight, 3.0, 2.0, self.family)

    def test_measure_ratio_inequality(self):
        weight = make_weight(self.grid, 'dunkl_power:0.5')
        cubes = [cube for cube in self.system.all_cubes() if len(cube) >= 2]
        rng = np.random.default_rng(7)
        for _ in range(500):
            cube = cubes[rng.integers(len(cubes))]
            pick = rng.choice(cube.members, size=rng.integers(1, len(cube)),
                    replace=False)
            closed_cube = orbit_closure(self.grid, cube.members)
            subset = orbit_closure(self.grid, pick)
            holds, report = verify_wp(self.grid, weight, 2.0, closed_cube, subset)
            self.assertTrue(holds, report)

    def test_subset_must_lie_in_the_cube(self):
        cube = self.system.cubes_at(self.system.k_max)[0]
        outside = np.setdiff1d(np.arange(self.grid.n), cube.members)[:1]
        with self.assertRaises(WeightError):
            verify_wp(self.grid, np.ones(self.grid.n), 2.0, cube.members, outside)

    def test_a1_constant_of_a_constant(self):
        self.assertAlmostEqual(a1_constant(self.grid, np.full(self.grid.n, 2.0)), 1.0)


class TestReverseHolder(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid((-1, 1), 32, make_root_system('A1', 1.0))
        cls.family = ball_family(cls.grid, count=100)

    def test_constant_weight_takes_the_largest_exponent(self):
        gamma, constant, report = reverse_holder(self.grid,
                make_weight(self.grid, 'const:1'), self.family)
        self.assertEqual(gamma, 0.5)
        self.assertAlmostEqual(constant, 1.0)
        self.assertEqual(len(report['ladder']), 8)

    def test_radial_power_weight(self):
        gamma, constant, _ = reverse_holder(self.grid,
                make_weight(self.grid, 'dunkl_power:0.5'), self.family)
        self.assertGreater(gamma, 0.0)
        self.assertGreaterEqual(constant, 1.0 - 1e-12)

    def test_non_radial_weight_is_rejected(self):
        with self.assertRaises(WeightError):
            reverse_holder(self.grid, make_weight(self.grid, 'euclid_power:0.5@0.3'),
                    self.family)

    def test_failure_reports_the_best_exponent(self):
        with self.assertRaises(WeightError) as ctx:
            reverse_holder(self.grid, make_weight(self.grid, 'const:1'), self.family,
                    cap=0.5)
        gamma, constant = ctx.exception.best
        self.assertAlmostEqual(constant, 1.0)


class TestOscillation(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid((-1, 1), 16, make_root_system('trivial'))

    def test_constant_symbol(self):
        everything = np.arange(self.grid.n)
        b = np.full(self.grid.n, 4.0)
        self.assertEqual(oscillation(self.grid, b, everything), 0.0)
        self.assertEqual(bmo_norm(self.grid, b, np.ones(self.grid.n)), 0.0)

    def test_sign_oscillation(self):
        b = np.sign(self.grid.points[:, 0])
        self.assertAlmostEqual(oscillation(self.grid, b, np.arange(self.grid.n)), 1.0)
        self.assertGreater(bmo_norm(self.grid, b, np.ones(self.grid.n)), 0.0)

    def test_bmo_metric(self):
        with self.assertRaises(ParameterError):
            bmo_norm(self.grid, np.ones(self.grid.n), np.ones(self.grid.n),
                    metric='chebyshev')

    def test_median_of_an_even_split(self):
        b = self.grid.points[:, 0]
        self.assertAlmostEqual(median_value(self.grid, b, np.arange(self.grid.n)), 0.0)

    def test_median_of_an_odd_region(self):
        b = np.arange(self.grid.n, dtype=float)
        self.assertEqual(median_value(self.grid, b, np.array([3, 4, 9])), 4.0)

    def test_orbit_closure(self):
        grid = build_grid((-1, 1), 16, make_root_system('A1', 1.0))
        closed = orbit_closure(grid, [0])
        self.assertEqual(closed.tolist(), [0, grid.n - 1])
        self.assertEqual(orbit_closure(grid, []).size, 0)


class TestRubioDeFrancia(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid((-1, 1), 16, make_root_system('A1', 1.0))

    def test_properties_of_the_iteration(self):
        for g in (np.ones(self.grid.n),
                np.abs(np.random.default_rng(3).normal(size=self.grid.n))):
            weight, report = rubio_de_francia(self.grid, g, 2.0)
            self.assertTrue(report['passed'], report)
            self.assertTrue(np.all(weight.values >= g - 1e-12))
            self.assertLessEqual(report['norm_ratio'], 2.0 + 1e-9)

    def test_norm_below_the_empirical_value(self):
        with self.assertRaises(ParameterError):
            rubio_de_francia(self.grid, np.ones(self.grid.n), 2.0, mdnorm=0.5)

    def test_invalid_arguments(self):
        with self.assertRaises(ParameterError):
            rubio_de_francia(self.grid, np.ones(self.grid.n), 2.0, terms=4)
        with self.assertRaises(ParameterError):
            rubio_de_francia(self.grid, np.zeros(self.grid.n), 2.0)
        with self.assertRaises(ParameterError):
            rubio_de_francia(self.grid, np.ones(self.grid.n), 1.0)


class TestResolutionDoubling(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grids = [build_grid((-1, 1), resolution, make_root_system('A1', 1.0))
                for resolution in (32, 64)]
        cls.families = [ball_family(grid, count=200, seed=0) for grid in cls.grids]

    def assertWithin(self, coarse, fine, factor):
        self.assertGreater(coarse, 0.0)
        self.assertLessEqual(fine / coarse, factor)
        self.assertGreaterEqual(fine / coarse, 1.0 / factor)

    def test_muckenhoupt_constant(self):
        coarse, fine = [ap_constant(grid, make_weight(grid, 'dunkl_power:1'), 2.0,
            family).estimate for grid, family in zip(self.grids, self.families)]
        self.assertWithin(coarse, fine, 1.5)

    def test_bmo_norm_of_the_logarithm(self):
        coarse, fine = [bmo_norm(grid, make_b(grid, 'logd'), np.ones(grid.n),
            'dunkl_orbit', family) for grid, family in zip(self.grids, self.families)]
        self.assertWithin(coarse, fine, 1.5)

    def test_reverse_holder_exponent(self):
        found = [reverse_holder(grid, make_weight(grid, 'dunkl_power:1'), family)
                for grid, family in zip(self.grids, self.families)]
        self.assertEqual(found[0][0], found[1][0])
        self.assertWithin(found[0][1], found[1][1], 1.5)
