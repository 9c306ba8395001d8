#! /usr/bin/env python
# -*- coding: utf-8 -*-

import os
import tempfile
import unittest

from core.config_loader import ConfigLoader
from core.exceptions import InvalidInputError
from core.models import LogLevel

EXAMPLE_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "run_example.yaml")


class ConfigLoaderTest(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, text: str) -> str:
        path = os.path.join(self._tmp.name, "config.yaml")
        with open(path, "w") as f:
            f.write(text)
        return path

    def test_defaults_without_file(self):
        config = ConfigLoader().get_config()
        self.assertEqual(config.solver.max_projections, 100_000)
        self.assertEqual(config.solver.gap_tol, 1e-6)
        self.assertEqual(config.run.log_level, LogLevel.INFO)

    def test_example_file_matches_defaults(self):
        self.assertEqual(ConfigLoader(EXAMPLE_CONFIG).get_config(), ConfigLoader().get_config())

    def test_partial_sections_and_coercion(self):
        path = self.write("solver:\n  gap_tol: 1e-9\n  epoch_length: 50\n"
                          "segmentation:\n  lambda: 2\n  sigma: 0.5\n"
                          "run:\n  log_level: debug\n")
        config = ConfigLoader(path).get_config()
        self.assertEqual(config.solver.gap_tol, 1e-9)
        self.assertIsInstance(config.solver.gap_tol, float)
        self.assertEqual(config.solver.epoch_length, 50)
        self.assertEqual(config.segmentation.lambda_, 2.0)
        self.assertIsInstance(config.segmentation.lambda_, float)
        self.assertEqual(config.segmentation.sigma, 0.5)
        self.assertEqual(config.run.log_level, LogLevel.DEBUG)
        self.assertEqual(config.solver.trace_every, 100)

    def test_unknown_keys_and_levels_warn(self):
        path = self.write("solver:\n  tolerance: 3\nrun:\n  log_level: loud\n")
        with self.assertLogs("core.config_loader", level="WARNING") as logs:
            config = ConfigLoader(path).get_config()
        self.assertEqual(config.run.log_level, LogLevel.INFO)
        self.assertTrue(any("tolerance" in line for line in logs.output))

    def test_empty_file(self):
        self.assertEqual(ConfigLoader(self.write("")).get_config(), ConfigLoader().get_config())

    def test_invalid_files(self):
        with self.assertRaises(InvalidInputError):
            ConfigLoader(self.write("solver: [1, 2\n"))
        with self.assertRaises(InvalidInputError):
            ConfigLoader(self.write("- just\n- a list\n"))
        with self.assertRaises(InvalidInputError):
            ConfigLoader(self.write("solver: 3\n"))
        with self.assertRaises(InvalidInputError):
            ConfigLoader(self.write("solver:\n  gap_tol: tiny\n"))
        with self.assertRaises(InvalidInputError):
            ConfigLoader(self.write("solver:\n  max_projections: 0\n"))
        with self.assertRaises(FileNotFoundError):
            ConfigLoader(os.path.join(self._tmp.name, "absent.yaml"))


if __name__ == '__main__':
    unittest.main()
