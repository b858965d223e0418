"""Tests for ds_tool.config."""

#pylint: disable=too-many-public-methods,import-error,too-few-public-methods,missing-docstring,unused-variable,multiple-imports
import os, tempfile
import unittest

from ds_tool import config
from ds_tool.config import ConfigurationError


class ConfigTestCase(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.conffile = os.path.join(self.directory.name, 'dsrc')

    def tearDown(self):
        self.directory.cleanup()

    def load(self, text):
        with open(self.conffile, 'w', encoding='utf-8') as fhandle:
            fhandle.write(text)
        return config.load_configuration(self.conffile)


class TestDefaults(unittest.TestCase):
    def test_defaults_without_a_file(self):
        run = config.load_configuration()
        self.assertEqual(run.root_system, 'A1')
        self.assertEqual(run.kappa, [1.0])
        self.assertEqual(run.box, (-1.0, 1.0))
        self.assertEqual(run.resolution, 64)
        self.assertEqual(run.kernel, 'riesz:1')
        self.assertEqual(run.p, [1.5, 2.0, 3.0])
        self.assertEqual(run.experiments, [])
        self.assertEqual(run.formats, ['json', 'csv'])
        self.assertIsNone(run.k_min)
        self.assertIsNone(run.ctilde0)
        self.assertIsNone(run.path)

    def test_echo_omits_the_path(self):
        echo = config.load_configuration().echo()
        self.assertNotIn('path', echo)
        self.assertEqual(echo['seed'], 0)

    def test_root_system_object(self):
        rs = config.load_configuration().root_system_object()
        self.assertEqual(rs.group.order, 2)


class TestFiles(ConfigTestCase):
    def test_values_override_the_defaults(self):
        run = self.load("[grid]\nroot_system = B2\nkappa = 1,2\nbox = -1,1,-1,1\n"
                "resolution = 16\n[experiments]\nnames = dyadic, sparse\nseed = 4\n")
        self.assertEqual(run.root_system, 'B2')
        self.assertEqual(run.kappa, [1.0, 2.0])
        self.assertEqual(run.box, (-1.0, 1.0, -1.0, 1.0))
        self.assertEqual(run.experiments, ['dyadic', 'sparse'])
        self.assertEqual(run.seed, 4)
        self.assertEqual(run.path, self.conffile)
        self.assertAlmostEqual(run.root_system_object().gamma, 12.0)

    def test_automatic_values(self):
        run = self.load("[dyadic]\nk_min = 1\nk_max = 4\n[kernel]\nctilde0 = 12\n")
        self.assertEqual((run.k_min, run.k_max), (1, 4))
        self.assertEqual(run.ctilde0, 12.0)

    def test_invalid_values_name_the_file(self):
        cases = ("[dyadic]\ndelta = 0.7\n", "[dyadic]\nk_min = 5\nk_max = 2\n",
                "[grid]\nresolution = many\n", "[grid]\nresolution = 4\n",
                "[grid]\nroot_system = E8\n", "[grid]\nbox = -1,1,0\n",
                "[kernel]\nkey = riesz:x\n", "[kernel]\nkey = custom:unknown\n",
                "[weights]\nu = gauss:1\n", "[weights]\nb = sin\n",
                "[weights]\np = 1,2\n", "[experiments]\nnames = everything\n",
                "[experiments]\ntrials = 0\n", "[output]\nformats = xml\n",
                "[grid\n")
        for text in cases:
            with self.assertRaises(ConfigurationError) as ctx:
                self.load(text)
            self.assertEqual(ctx.exception.path, self.conffile, text)
            self.assertIn(self.conffile, str(ctx.exception))

    def test_output_directory_must_not_be_a_file(self):
        with self.assertRaises(ConfigurationError):
            self.load("[output]\ndirectory = %s\n" % __file__)

    def test_missing_explicit_file(self):
        with self.assertRaises(ConfigurationError):
            config.discover_and_load(os.path.join(self.directory.name, 'missing'))

    def test_explicit_file_is_loaded(self):
        with open(self.conffile, 'w', encoding='utf-8') as fhandle:
            fhandle.write("[experiments]\ntrials = 3\n")
        self.assertEqual(config.discover_and_load(self.conffile).trials, 3)


class TestPaths(unittest.TestCase):
    def test_home_is_expanded(self):
        home = os.path.expanduser('~')
        for value in ('~/out', '$HOME/out', '%HOME%/out'):
            self.assertEqual(config.get_path({'directory': value}),
                    home + '/out')
        self.assertEqual(config.get_path({'directory': 'out/~'}), 'out/~')

    def test_error_message_without_a_path(self):
        self.assertEqual(str(ConfigurationError('broken')), 'broken')
