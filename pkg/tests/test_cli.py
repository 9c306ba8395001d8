#! /usr/bin/env python
# -*- coding: utf-8 -*-

import contextlib
import io
import json
import os
import re
import tempfile
import unittest

import pandas as pd

from main import EXIT_BAD_INPUT, EXIT_IO, EXIT_OK, main

RESULT_LINE = re.compile(r"^nu_s=\S+ nu_d=\S+ F=\S+$")


def run_cli(*argv: str):
    out = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
        code = main(list(argv))
    return code, out.getvalue().splitlines()


class SolveCommandTest(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.out = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def test_synthetic_solve_with_brute_force_check(self):
        code, lines = run_cli("solve", "--synthetic", "n=6,r=3,seed=1", "--out", self.out,
                              "--gap-tol", "1e-10", "--max-projections", "200000", "--verify")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(lines), 1)
        self.assertRegex(lines[0], RESULT_LINE)
        for name in ("trace.csv", "solution.txt", "instance.json", "run.log"):
            self.assertTrue(os.path.exists(os.path.join(self.out, name)), name)
        with open(os.path.join(self.out, "instance.json")) as f:
            metadata = json.load(f)
        self.assertEqual(metadata["solver"], "rcdm")
        self.assertTrue(metadata["converged"])
        self.assertIn("brute_force_min", metadata)
        trace = pd.read_csv(os.path.join(self.out, "trace.csv"))
        self.assertEqual(list(trace.columns), ["projections", "nu_s", "nu_d", "g", "seconds"])
        self.assertEqual(trace["projections"].iloc[0], 0)
        self.assertTrue((trace["seconds"] == 0).all())

    def test_traces_are_byte_identical(self):
        contents = []
        for run in ("a", "b"):
            out = os.path.join(self.out, run)
            code, _ = run_cli("solve", "--solver", "acdm", "--synthetic", "n=5,r=3", "--seed", "4",
                              "--trace-every", "10", "--out", out)
            self.assertEqual(code, EXIT_OK)
            with open(os.path.join(out, "trace.csv"), "rb") as f:
                contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

    def test_synthetic_grid_writes_mask_and_thetas(self):
        code, lines = run_cli("solve", "--solver", "acdm", "--synthetic-grid", "6", "--record-theta",
                              "--max-projections", "2000", "--out", self.out)
        self.assertEqual(code, EXIT_OK)
        self.assertRegex(lines[0], RESULT_LINE)
        with open(os.path.join(self.out, "mask.pgm"), "rb") as f:
            self.assertTrue(f.read().startswith(b"P5\n6 6\n255\n"))
        thetas = pd.read_csv(os.path.join(self.out, "thetas_acdm.csv"))
        self.assertAlmostEqual(thetas["theta"].iloc[0], 1.0 / 9.0)

    def test_bad_arguments(self):
        self.assertEqual(run_cli("solve", "--solver", "newton", "--synthetic", "n=4,r=2")[0], EXIT_BAD_INPUT)
        self.assertEqual(run_cli("solve", "--out", self.out)[0], EXIT_BAD_INPUT)
        self.assertEqual(run_cli("solve", "--synthetic", "n=4", "--out", self.out)[0], EXIT_BAD_INPUT)
        self.assertEqual(run_cli("solve", "--synthetic", "n=4,r=2", "--synthetic-grid", "3",
                                 "--out", self.out)[0], EXIT_BAD_INPUT)
        self.assertEqual(run_cli("verify", "eso", "--lipschitz", "0")[0], EXIT_BAD_INPUT)

    def test_unreadable_images(self):
        missing = os.path.join(self.out, "missing.ppm")
        self.assertEqual(run_cli("solve", "--image", missing, "--out", self.out)[0], EXIT_IO)
        broken = os.path.join(self.out, "broken.ppm")
        with open(broken, "wb") as f:
            f.write(b"P6\n4 4\n255\n" + bytes(10))
        self.assertEqual(run_cli("solve", "--image", broken, "--out", self.out)[0], EXIT_IO)

    def test_config_file_supplies_defaults(self):
        config = os.path.join(self.out, "run.yaml")
        target = os.path.join(self.out, "from-config")
        with open(config, "w") as f:
            f.write(f"solver:\n  gap_tol: 1e-9\n  trace_every: 7\nrun:\n  output_directory: {target}\n"
                    f"  monitor_resources: false\n")
        code, _ = run_cli("solve", "--config", config, "--synthetic", "n=4,r=2", "--trace-every", "5")
        self.assertEqual(code, EXIT_OK)
        trace = pd.read_csv(os.path.join(target, "trace.csv"))
        self.assertTrue(all(p % 5 == 0 for p in trace["projections"].iloc[:-1]))


class CompareCommandTest(unittest.TestCase):

    def test_compare_writes_summary(self):
        with tempfile.TemporaryDirectory() as out:
            code, lines = run_cli("compare", "--synthetic", "n=5,r=3,seed=2", "--solvers", "rcdm,ap",
                                  "--gap-tol", "1e-8", "--out", out)
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(len(lines), 2)
            self.assertTrue(lines[0].startswith("solver=rcdm nu_s="))
            self.assertTrue(lines[1].startswith("solver=ap nu_s="))
            summary = pd.read_csv(os.path.join(out, "summary.csv"))
            self.assertEqual(len(summary), 12)
            self.assertEqual(sorted(summary["solver"].unique()), ["ap", "rcdm"])
            for name in ("trace_rcdm.csv", "trace_ap.csv", "solution_rcdm.txt", "solution_ap.txt"):
                self.assertTrue(os.path.exists(os.path.join(out, name)), name)

    def test_compare_needs_two_solvers(self):
        with tempfile.TemporaryDirectory() as out:
            code, _ = run_cli("compare", "--synthetic", "n=5,r=3", "--solvers", "rcdm,rcdm", "--out", out)
        self.assertEqual(code, EXIT_BAD_INPUT)


class VerifyCommandTest(unittest.TestCase):

    def test_verify_suite(self):
        with tempfile.TemporaryDirectory() as out:
            code, lines = run_cli("verify", "appendixb", "--seed", "7", "--out", out)
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(len(lines), 5)
            self.assertTrue(all(line.split()[1] == "passed" for line in lines))
            with open(os.path.join(out, "verification.txt")) as f:
                self.assertEqual(f.read().splitlines(), lines)

    def test_verify_all(self):
        with tempfile.TemporaryDirectory() as out:
            code, lines = run_cli("verify", "all", "--seed", "7", "--trials", "2000", "--rate-seeds", "50",
                                  "--out", out)
        self.assertEqual(code, EXIT_OK)
        claims = {line.split()[0].split(":")[0] for line in lines}
        self.assertEqual(claims, {"eso", "theorem1", "duality", "appendixb", "rate"})
        self.assertTrue(all(line.split()[1] in ("passed", "skipped") for line in lines), lines)


if __name__ == '__main__':
    unittest.main()
