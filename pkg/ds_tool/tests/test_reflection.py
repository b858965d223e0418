"""Tests for ds_tool.analysis.reflection."""

#pylint: disable=too-many-public-methods,import-error,too-few-public-methods,missing-docstring,unused-variable,multiple-imports
import math, os, tempfile
import unittest

import numpy as np

from ds_tool.analysis.errors import ReflectionError
from ds_tool.analysis.reflection import RootSystem, dunkl_distance, \
        homogeneous_dimension, load_root_systems, make_root_system, orbit, \
        quantize, reflect, reflection_matrix, resolve_root_system

SQ2 = math.sqrt(2)


def brute_force_closure(rs):
    """All products of reflections, grown until nothing new appears."""
    generators = [reflection_matrix(root) for root in rs.roots]
    elements = {quantize(np.eye(rs.dimension)): np.eye(rs.dimension)}
    changed = True
    while changed:
        changed = False
        for element in list(elements.values()):
            for generator in generators:
                product = element @ generator
                if quantize(product) not in elements:
                    elements[quantize(product)] = product
                    changed = True
    return set(elements)


class TestReflection(unittest.TestCase):
    def test_reflect_flips_the_root_direction(self):
        self.assertAlmostEqual(reflect([SQ2], [0.5])[0], -0.5)
        np.testing.assert_allclose(reflect([SQ2, 0.0], [0.3, 0.7]), [-0.3, 0.7])

    def test_reflection_is_an_involution(self):
        root = np.array([1.0, -1.0])
        x = np.array([0.4, 1.3])
        np.testing.assert_allclose(reflect(root, reflect(root, x)), x)

    def test_unnormalized_roots_are_rejected(self):
        with self.assertRaises(ReflectionError):
            reflect([1.0, 0.0], [0.5, 0.5])

    def test_dimension_mismatch_is_rejected(self):
        with self.assertRaises(ReflectionError):
            reflect([SQ2], [0.5, 0.5])


class TestRootSystems(unittest.TestCase):
    def test_catalog_group_orders(self):
        expected = {'trivial': 1, 'A1': 2, 'A1xA1': 4, 'B2': 8, 'I2(3)': 6,
                'I2(5)': 10, 'A1^3': 8}
        for key, order in expected.items():
            rs = make_root_system(key)
            self.assertEqual(rs.group.order, order, key)

    def test_group_closure_matches_brute_force(self):
        for key in ('A1', 'A1xA1', 'B2', 'I2(3)', 'I2(6)'):
            rs = make_root_system(key)
            self.assertTrue(rs.group.is_closed(), key)
            self.assertEqual({quantize(g) for g in rs.group.elements},
                    brute_force_closure(rs), key)

    def test_multiplicities_per_class(self):
        rs = make_root_system('B2', [1.0, 2.0])
        self.assertAlmostEqual(rs.gamma, 4 * 1.0 + 4 * 2.0)
        self.assertAlmostEqual(homogeneous_dimension(rs), 14.0)

    def test_homogeneous_dimension_of_rank_one(self):
        self.assertAlmostEqual(homogeneous_dimension(make_root_system('A1', 1.0)), 3.0)

    def test_non_invariant_multiplicity_is_rejected(self):
        with self.assertRaises(ReflectionError):
            RootSystem(1, [[SQ2], [-SQ2]], [1.0, 2.0])

    def test_missing_negative_root_is_rejected(self):
        with self.assertRaises(ReflectionError):
            RootSystem(1, [[SQ2]], [1.0])

    def test_wrong_number_of_class_multiplicities(self):
        with self.assertRaises(ReflectionError):
            make_root_system('A1xA1', [1.0, 2.0, 3.0])

    def test_unknown_key(self):
        with self.assertRaises(ReflectionError):
            make_root_system('E8')

    def test_trivial_system_with_dimension(self):
        rs = make_root_system('trivial:2')
        self.assertEqual(rs.dimension, 2)
        self.assertEqual(rs.group.order, 1)


class TestOrbitsAndMetric(unittest.TestCase):
    def test_orbit_sizes(self):
        group = make_root_system('B2').group
        self.assertEqual(len(orbit(group, [1.0, 0.0])), 4)
        self.assertEqual(len(orbit(group, [1.0, 2.0])), 8)
        self.assertEqual(len(orbit(group, [0.0, 0.0])), 1)

    def test_rank_one_distance(self):
        group = make_root_system('A1').group
        self.assertAlmostEqual(dunkl_distance(group, [0.3], [-0.5]), 0.2)
        self.assertAlmostEqual(dunkl_distance(group, [0.3], [0.5]), 0.2)

    def test_metric_axioms_on_seeded_triples(self):
        rng = np.random.default_rng(0)
        for key in ('A1xA1', 'B2', 'I2(3)'):
            group = make_root_system(key).group
            for _ in range(300):
                x, y, z = rng.uniform(-1, 1, size=(3, 2))
                dxy = dunkl_distance(group, x, y)
                self.assertAlmostEqual(dxy, dunkl_distance(group, y, x), delta=1e-9)
                self.assertLessEqual(dxy, dunkl_distance(group, x, z) +
                        dunkl_distance(group, z, y) + 1e-9)
                self.assertLessEqual(dxy, np.linalg.norm(x - y) + 1e-9)

    def test_distance_vanishes_on_the_orbit(self):
        group = make_root_system('B2').group
        for image in group.images(np.array([0.2, 0.7])):
            self.assertAlmostEqual(dunkl_distance(group, [0.2, 0.7], image), 0.0)


class TestRootFiles(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'roots.txt')

    def tearDown(self):
        self.directory.cleanup()

    def write(self, text):
        with open(self.path, 'w', encoding='utf-8') as fhandle:
            fhandle.write(text)

    def test_sqrt_entries_are_parsed(self):
        self.write("# rank one\n[line]\ndimension = 1\n"
                "root = [sqrt(2)] kappa = 0.5\nroot = [-sqrt(2)] kappa = 0.5\n")
        systems = load_root_systems(self.path)
        self.assertIn('line', systems)
        self.assertAlmostEqual(systems['line'].gamma, 1.0)

    def test_file_entries_take_precedence_over_the_catalog(self):
        self.write("[A1]\ndimension = 1\nroot = [sqrt(2)] kappa = 3\n"
                "root = [-sqrt(2)] kappa = 3\n")
        rs = resolve_root_system('A1', 1.0, 1, self.path)
        self.assertAlmostEqual(rs.gamma, 6.0)
        self.assertAlmostEqual(resolve_root_system('B2', 1.0).gamma, 8.0)

    def test_garbage_entries_are_rejected(self):
        self.write("[bad]\ndimension = 1\nroot = [two] kappa = 1\n")
        with self.assertRaises(ReflectionError):
            load_root_systems(self.path)
