"""Tests for ds_tool.analysis.weighted_bounds."""

#pylint: disable=too-many-public-methods,import-error,too-few-public-methods,missing-docstring,unused-variable,multiple-imports
import math
import unittest

import numpy as np

from ds_tool.analysis.dyadic import SparseFamily, build_bundle
from ds_tool.analysis.errors import BoundsError, ParameterError
from ds_tool.analysis.measure import build_grid
from ds_tool.analysis.operators import DiscreteOperator, hilbert_kernel, kernel_from_key
from ds_tool.analysis.probes import make_b
from ds_tool.analysis.reflection import make_root_system
from ds_tool.analysis.sparse import make_setting, sparse_family_T
from ds_tool.analysis.weighted_bounds import NormReport, ap_exponent, \
        batch_maxima, is_stable, lower_bound_experiment, median_split, \
        rdf_transfer_check, seed_spread, stability, verify_T_weighted, \
        verify_commutator_two_weight, verify_sparse_weighted_bound, weighted_norm
from ds_tool.analysis.weights import make_weight


def line_setting(resolution=32, kernel='custom:hilbert'):
    grid = build_grid((-1, 1), resolution, make_root_system('trivial'))
    op = DiscreteOperator(grid, kernel_from_key(grid, kernel))
    return make_setting(op, build_bundle(grid, size=2, seed=0), calibration_balls=50)


class TestNorms(unittest.TestCase):
    def test_weighted_norm_of_the_unit_function(self):
        grid = build_grid((-1, 1), 16, make_root_system('trivial'))
        self.assertAlmostEqual(weighted_norm(grid, np.ones(grid.n), 2, np.ones(grid.n)),
                math.sqrt(2))
        self.assertAlmostEqual(weighted_norm(grid, np.full(grid.n, 4.0), 2,
            np.ones(grid.n)), 2 * math.sqrt(2))
        with self.assertRaises(ParameterError):
            weighted_norm(grid, np.ones(grid.n), 0.5, np.ones(grid.n))

    def test_ap_exponent(self):
        self.assertEqual(ap_exponent(2.0), 1.0)
        self.assertEqual(ap_exponent(1.5), 2.0)
        self.assertEqual(ap_exponent(4.0), 1.0)


class TestNormReport(unittest.TestCase):
    def report(self, ratios, **extras):
        rows = [{'seed': i, 'ratio': r} for i, r in enumerate(ratios)]
        return NormReport('test', 2.0, {'u': 'const:1'}, rows, {}, extras)

    def test_summary(self):
        report = self.report([1.0, 3.0, 2.0])
        self.assertEqual(report.max_ratio, 3.0)
        self.assertEqual(report.median_ratio, 2.0)
        self.assertTrue(report.passed)
        result = report.as_dict()
        self.assertEqual(result['u'], 'const:1')
        self.assertEqual(result['trials'], 3)
        self.assertIsNone(result['stability']['resolution_factor'])

    def test_seed_spread_over_batches(self):
        self.assertEqual(self.report([1.0, 2.0, 3.0, 4.0, 5.0]).seed_spread(), 5.0)
        self.assertEqual(self.report([2.0]).seed_spread(), 1.0)
        self.assertIsNone(self.report([]).seed_spread())
        self.assertEqual(self.report([0.0, 1.0]).seed_spread(), math.inf)
        self.assertIsNone(self.report([0.0, 0.0]).seed_spread())

    def test_rows_sharing_a_seed_share_a_batch(self):
        rows = [{'seed': seed, 'ratio': ratio} for seed, ratio in
                ((0, 1.0), (0, 9.0), (1, 2.0), (1, 3.0))]
        self.assertEqual(batch_maxima(rows), [9.0, 3.0])
        self.assertEqual(seed_spread(rows), 3.0)

    def test_spread_across_five_batches_is_gated(self):
        report = self.report([1.0, 1.0, 1.0, 1.0, 50.0])
        self.assertEqual(report.seed_spread(), 50.0)
        self.assertFalse(report.passed)
        self.assertFalse(report.as_dict()['passed'])
        self.assertTrue(self.report([1.0, 1.5, 1.2, 1.9, 1.0]).passed)

    def test_spread_is_not_gated_before_every_batch_is_filled(self):
        report = self.report([1.0, 50.0])
        self.assertEqual(report.stability()['batches'], 2)
        self.assertTrue(report.passed)

    def test_resolution_factor_is_gated(self):
        for factor, expected in ((1.0, True), (0.6, True), (2.0, True), (0.4, False),
                (4.0, False)):
            report = self.report([1.0, 2.0])
            report.resolution_factor = factor
            self.assertEqual(report.passed, expected, factor)
        self.assertFalse(is_stable({'resolution_factor': math.inf}))
        self.assertTrue(is_stable(stability([])))

    def test_failures(self):
        self.assertFalse(self.report([1.0, float('inf')]).passed)
        self.assertFalse(self.report([1.0], holds=False).passed)
        report = self.report([1.0])
        report.trials[0]['holds'] = False
        self.assertFalse(report.passed)


class TestSparseBounds(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.setting = line_setting()
        cls.grid = cls.setting.grid
        f = np.zeros(cls.grid.n)
        f[10:14] = 1.0
        _, report = sparse_family_T(cls.setting, f)
        cls.family = report.recubed
        cls.riesz = line_setting(kernel='riesz:1')

    def test_unweighted_sparse_bound(self):
        u = make_weight(self.grid, 'const:1')
        report = verify_sparse_weighted_bound(self.grid, self.family, u, 2.0, trials=4)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.constants['ap'], 1.0)
        self.assertEqual(len(report.trials), 8)
        for row in report.trials:
            self.assertAlmostEqual(row['normalized'], row['ratio'])
        self.assertIn('dual', [row['kind'] for row in report.trials])

    def test_power_weight_is_normalized(self):
        u = make_weight(self.grid, 'euclid_power:0.5@0.5')
        report = verify_sparse_weighted_bound(self.grid, self.family, u, 3.0, trials=4)
        self.assertTrue(report.passed)
        self.assertGreaterEqual(report.constants['ap'], 1.0 - 1e-12)

    def test_empty_family(self):
        with self.assertRaises(BoundsError):
            verify_sparse_weighted_bound(self.grid, SparseFamily([], []),
                    make_weight(self.grid, 'const:1'), 2.0)

    def test_operator_bound_with_the_constant_weight(self):
        u = make_weight(self.grid, 'const:1')
        report = verify_T_weighted(self.setting, u, 2.0, trials=3)
        self.assertTrue(report.passed, report.as_dict())
        self.assertIn('l2_opnorm', report.extras)
        self.assertGreater(report.extras['l2_opnorm'], 0.0)
        self.assertEqual(report.as_dict()['kernel'], 'custom:hilbert')

    def test_unweighted_norm_agrees_with_the_l2_estimate(self):
        report = verify_T_weighted(self.riesz, make_weight(self.riesz.grid, 'const:1'),
                2.0, trials=6)
        self.assertTrue(report.extras['holds'], report.extras)
        self.assertLessEqual(report.extras['l2_factor'], 1.5)
        self.assertGreaterEqual(report.extras['l2_factor'], 1.0 / 1.5)

    def test_zero_kernel_ratios_vanish(self):
        setting = line_setting(kernel='custom:zero')
        report = verify_T_weighted(setting, make_weight(setting.grid, 'const:1'), 2.0,
                trials=3)
        self.assertEqual(report.max_ratio, 0.0)
        self.assertTrue(report.passed)


class TestTwoWeight(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.setting = line_setting()
        cls.grid = cls.setting.grid
        cls.one = make_weight(cls.grid, 'const:1')

    def test_commutator_with_a_coordinate(self):
        b = make_b(self.grid, 'coord:1')
        report = verify_commutator_two_weight(self.setting, b, self.one, self.one, 2.0,
                trials=3, b_tag='coord:1')
        self.assertTrue(report.passed, report.as_dict())
        self.assertGreater(report.constants['bmo_theta'], 0.0)
        for row in report.trials:
            self.assertTrue(row['splitting_holds'], row)
            self.assertAlmostEqual(row['normalized'],
                    row['ratio'] / report.constants['bmo_theta'])
        self.assertEqual(report.as_dict()['b'], 'coord:1')

    def test_constant_symbol_is_rejected(self):
        with self.assertRaises(BoundsError):
            verify_commutator_two_weight(self.setting, np.full(self.grid.n, 2.0),
                    self.one, self.one, 2.0, trials=2)


class TestLowerBound(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid((-1, 1), 64, make_root_system('trivial'))
        cls.op = DiscreteOperator(cls.grid, hilbert_kernel(cls.grid))
        cls.b = make_b(cls.grid, 'coord:1')
        cls.one = make_weight(cls.grid, 'const:1')
        # width 2: radius width/12, center two radii from the left edge
        cls.center, cls.radius = np.array([-2.0 / 3]), 1.0 / 6

    def test_every_link_holds(self):
        result = lower_bound_experiment(self.grid, self.op, self.b, self.one, self.one,
                2.0, self.center, self.radius)
        self.assertTrue(result['passed'], result['links'])
        self.assertEqual([link['name'] for link in result['links']],
                ['median_split', 'oscillation_by_median', 'kernel_lower_bound',
                    'oscillation_by_commutator', 'holder', 'reverse_holder',
                    'bmo_by_operator_norm'])
        self.assertAlmostEqual(result['shifted_center'][0], 1.0 / 6)

    def test_median_split_halves_the_region(self):
        region = self.grid.euclidean_ball(np.array([0.2]), 0.3)
        first, second, median = median_split(self.grid, self.b, region)
        np.testing.assert_array_equal(np.union1d(first, second), region)
        self.assertEqual(np.intersect1d(first, second).size, 0)
        self.assertTrue(np.all(self.b[first] <= median))
        self.assertTrue(np.all(self.b[second] >= median))

    def test_non_radial_weight(self):
        u = make_weight(self.grid, 'euclid_power:0.5@0.3')
        with self.assertRaises(BoundsError):
            lower_bound_experiment(self.grid, self.op, self.b, u, self.one, 2.0,
                    self.center, self.radius)

    def test_kernel_without_direction(self):
        op = DiscreteOperator(self.grid, kernel_from_key(self.grid, 'custom:zero'))
        with self.assertRaises(BoundsError):
            lower_bound_experiment(self.grid, op, self.b, self.one, self.one, 2.0,
                    self.center, self.radius)

    def test_shift_outside_the_box(self):
        with self.assertRaises(BoundsError):
            lower_bound_experiment(self.grid, self.op, self.b, self.one, self.one, 2.0,
                    np.array([0.5]), self.radius)


class TestTransfer(unittest.TestCase):
    def test_unit_function_comes_first(self):
        setting = line_setting(resolution=16)
        report = rdf_transfer_check(setting, 2.0, trials=2)
        self.assertEqual(report.trials[0]['g'], 'one')
        self.assertTrue(report.passed, report.as_dict())
        self.assertEqual(report.constants['C'], report.max_ratio)
