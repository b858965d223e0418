"""Tests for ds_tool.analysis.measure."""

#pylint: disable=too-many-public-methods,import-error,too-few-public-methods,missing-docstring,unused-variable,multiple-imports
import math
import unittest

import numpy as np

from ds_tool.analysis.errors import GridError
from ds_tool.analysis.measure import BallSpec, WeightedGrid, ball_measure, build_grid, \
        density, doubling_and_growth, model_ball_measure, unit_ball_volume, \
        verify_comparison, verify_scaling
from ds_tool.analysis.reflection import make_root_system


class TestDensity(unittest.TestCase):
    def test_rank_one_density(self):
        rs = make_root_system('A1', 1.0)
        # both roots of the pair contribute: h(x) = 2 x^2
        self.assertAlmostEqual(density(rs, np.array([0.5])), 0.5)
        self.assertAlmostEqual(density(rs, np.array([0.0])), 0.0)

    def test_zero_multiplicity_gives_lebesgue(self):
        rs = make_root_system('A1', 0.0)
        np.testing.assert_allclose(density(rs, np.array([[0.0], [0.3]])), [1.0, 1.0])

    def test_unit_ball_volumes(self):
        self.assertAlmostEqual(unit_ball_volume(1), 2.0)
        self.assertAlmostEqual(unit_ball_volume(2), math.pi)
        self.assertAlmostEqual(unit_ball_volume(3), 4 * math.pi / 3)

    def test_model_ball_measure_of_lebesgue(self):
        rs = make_root_system('trivial')
        self.assertAlmostEqual(model_ball_measure(rs, np.array([0.3]), 0.25), 0.5)

    def test_model_ball_measure_scales_with_homogeneous_dimension(self):
        rs = make_root_system('A1', 1.0)
        small = model_ball_measure(rs, np.array([0.0]), 0.1)
        large = model_ball_measure(rs, np.array([0.0]), 0.2)
        self.assertAlmostEqual(large / small, 8.0)

    def test_ball_radius_must_be_positive(self):
        with self.assertRaises(GridError):
            BallSpec(np.zeros(1), 0.0)


class TestGrid(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.rs = make_root_system('A1', 1.0)
        cls.grid = build_grid((-1, 1), 256, cls.rs)

    def test_total_mass_matches_the_closed_form(self):
        self.assertAlmostEqual(self.grid.weights.sum(), 4.0 / 3.0, places=5)

    def test_lebesgue_square_has_area_four(self):
        grid = build_grid((-1, 1), 16, make_root_system('A1xA1', 0.0))
        self.assertAlmostEqual(grid.weights.sum(), 4.0, places=12)
        self.assertEqual(grid.n, 256)

    def test_ball_doubling_at_the_origin(self):
        small = ball_measure(self.grid, BallSpec(np.zeros(1), 0.25, 'euclidean'))
        large = ball_measure(self.grid, BallSpec(np.zeros(1), 0.5, 'euclidean'))
        self.assertAlmostEqual(large / small / 8.0, 1.0, delta=1e-3)
        self.assertAlmostEqual(large, 2.0 / 3.0 * 0.125, delta=1e-5)

    def test_orbit_ball_contains_the_mirror_image(self):
        members = self.grid.dunkl_ball(np.array([0.5]), 0.1)
        points = self.grid.points[members, 0]
        self.assertTrue(np.any(points > 0) and np.any(points < 0))
        np.testing.assert_allclose(np.sort(np.abs(points))[::2],
                np.sort(np.abs(points))[1::2])

    def test_permutations_realize_the_group(self):
        for element, perm in zip(self.grid.group.elements, self.grid.perms):
            np.testing.assert_allclose(self.grid.points[perm],
                    self.grid.points @ element.T, atol=1e-12)

    def test_dunkl_distances_do_not_exceed_euclidean(self):
        grid = build_grid((-1, 1), 12, make_root_system('B2', 1.0))
        self.assertTrue(np.all(grid.dunkl_distances() <=
            grid.euclidean_distances() + 1e-12))

    def test_non_invariant_box_is_rejected(self):
        with self.assertRaises(GridError):
            build_grid((0, 1), 32, self.rs)

    def test_resolution_lower_bound(self):
        with self.assertRaises(GridError):
            build_grid((-1, 1), 4, self.rs)

    def test_average_over_an_empty_set_fails(self):
        with self.assertRaises(GridError):
            self.grid.average(np.ones(self.grid.n), np.array([], dtype=np.int64))

    def test_stored_weights_are_reused(self):
        grid = WeightedGrid(self.rs, (-1, 1), 256, weights=self.grid.weights)
        np.testing.assert_array_equal(grid.weights, self.grid.weights)
        with self.assertRaises(GridError):
            WeightedGrid(self.rs, (-1, 1), 256, weights=np.ones(3))


class TestChecks(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid((-1, 1), 256, make_root_system('A1', 1.0))

    def test_scaling_matches_the_homogeneous_dimension(self):
        report = verify_scaling(self.grid, samples=[(np.zeros(1), 0.25, 2.0),
            (np.array([0.25]), 0.125, 2.0)])
        self.assertEqual(report['exponent'], 3.0)
        self.assertLess(report['max_deviation'], 1e-3)

    def test_random_scaling_checks_are_bounded(self):
        report = verify_scaling(self.grid, trials=50)
        self.assertEqual(report['samples'], 50)
        self.assertLess(report['max_deviation'], 1.0)

    def test_orbit_ball_bounds_hold(self):
        report = verify_comparison(self.grid, samples=100)
        self.assertEqual(report['orbit_bound_violations'], 0)
        self.assertGreater(report['min_ratio'], 0)

    def test_doubling_constant_is_finite(self):
        report = doubling_and_growth(self.grid, samples=100)
        self.assertGreater(report['doubling_constant'], 1.0)
        self.assertTrue(np.isfinite(report['growth_constant']))
