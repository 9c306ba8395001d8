#! /usr/bin/env python
# -*- coding: utf-8 -*-

import math
import unittest

import numpy as np
import numpy.testing as npt

from core.blocks import EdgeCutBlock, ModularBlock
from core.decomposition import Decomposition, DualIterate, project_product, project_zero_sum, random_feasible_point
from core.duality import discrete_certificate, discrete_gap, dual_value, primal_value, smooth_gap
from core.exceptions import InvalidInputError
from core.instances import (
    edge_modular_instance, modular_only_instance, random_decomposition, two_edge_instance,
)
from core.models import SolverConfig, SolverKind, SyntheticSpec
from core.set_functions import best_level_set, brute_force_min
from core.solvers import (
    GapMonitor, acdm_run, ap_fixed_point_residuals, ap_run, approx_run, epoch_length, next_theta,
    rcdm_run, rcdm_step, run_solver,
)
from utils.rng import make_rng


def two_edge_start(d: Decomposition) -> DualIterate:
    return DualIterate(d, [np.array([1.0, -1.0]), np.array([1.0, -1.0])])


def edge_modular_optimum(d: Decomposition) -> DualIterate:
    return DualIterate(d, [np.array([-0.55, 0.55]), np.array([0.3, -0.8])])


class DualIterateTest(unittest.TestCase):

    def test_cached_sum_tracks_blocks(self):
        d = random_decomposition(SyntheticSpec(n=7, r=4, seed=2))
        y = DualIterate.initial(d)
        rng = make_rng(0, "test")
        for _ in range(500):
            rcdm_step(y, int(rng.integers(d.r)))
        self.assertLess(y.sum_drift(), 1e-12)
        npt.assert_allclose(y.primal(), -y.dense().sum(axis=0), atol=1e-12)

    def test_initial_point(self):
        d = edge_modular_instance()
        npt.assert_array_equal(DualIterate.initial(d).dense(), [[0.0, 0.0], [0.3, -0.8]])

    def test_shape_checks(self):
        d = two_edge_instance()
        with self.assertRaises(InvalidInputError):
            DualIterate(d, [np.zeros(2)])
        with self.assertRaises(InvalidInputError):
            DualIterate.from_dense(d, np.zeros((3, 2)))
        with self.assertRaises(InvalidInputError):
            project_product(d, np.zeros((2, 3)))

    def test_random_feasible_points(self):
        d = random_decomposition(SyntheticSpec(n=6, r=3, seed=4))
        rng = make_rng(1, "feasible")
        for _ in range(20):
            self.assertTrue(random_feasible_point(d, rng).is_feasible())


class ZeroSumProjectionTest(unittest.TestCase):

    def test_hand_example(self):
        a = project_zero_sum(np.array([[1.0, 0.0], [0.0, 1.0]]))
        npt.assert_allclose(a, [[0.5, -0.5], [-0.5, 0.5]])
        npt.assert_allclose(a.sum(axis=0), [0.0, 0.0])

    def test_equal_blocks_map_to_zero(self):
        npt.assert_allclose(project_zero_sum(np.tile([2.0, -1.0, 3.0], (4, 1))), np.zeros((4, 3)))

    def test_zero_sum_input_is_fixed(self):
        a = np.array([[1.0, 2.0], [-3.0, 0.5], [2.0, -2.5]])
        npt.assert_allclose(project_zero_sum(a), a)

    def test_accepts_iterates_and_checks_rows(self):
        d = two_edge_instance()
        npt.assert_allclose(project_zero_sum(two_edge_start(d)), np.zeros((2, 2)))
        with self.assertRaises(InvalidInputError):
            project_zero_sum(np.zeros((3, 2)), r=2)


class GapTest(unittest.TestCase):

    def test_gaps_at_two_edge_start(self):
        d = two_edge_instance()
        y = two_edge_start(d)
        self.assertAlmostEqual(y.g(), 8.0)
        self.assertAlmostEqual(smooth_gap(d, y), 16.0)
        certificate = discrete_certificate(d, y)
        self.assertEqual(certificate.subset, frozenset())
        self.assertAlmostEqual(certificate.lower_bound, -2.0)
        self.assertAlmostEqual(discrete_gap(d, y), 2.0)

    def test_gaps_vanish_at_origin(self):
        d = two_edge_instance()
        y = DualIterate.initial(d)
        self.assertEqual(smooth_gap(d, y), 0.0)
        self.assertEqual(discrete_gap(d, y), 0.0)

    def test_gaps_vanish_at_optimum(self):
        d = edge_modular_instance()
        y = edge_modular_optimum(d)
        self.assertAlmostEqual(smooth_gap(d, y), 0.0, places=12)
        self.assertAlmostEqual(discrete_gap(d, y), 0.0, places=12)

    def test_smooth_gap_is_primal_minus_dual(self):
        d = random_decomposition(SyntheticSpec(n=5, r=3, seed=8))
        rng = make_rng(2, "gap")
        for _ in range(20):
            y = random_feasible_point(d, rng)
            nu_s = smooth_gap(d, y)
            self.assertGreaterEqual(nu_s, -1e-12)
            self.assertAlmostEqual(nu_s, primal_value(d, y.primal()) - dual_value(y), places=9)


class RcdmTest(unittest.TestCase):

    def test_step_on_two_edge_instance(self):
        d = two_edge_instance()
        y = rcdm_step(two_edge_start(d), 0)
        npt.assert_allclose(y.blocks[0], [-1.0, 1.0])
        npt.assert_allclose(y.blocks[1], [1.0, -1.0])
        self.assertEqual(y.g(), 0.0)

    def test_single_block_projects_origin(self):
        d = Decomposition(2, [EdgeCutBlock(2, 0, 1, 1.0)])
        y = rcdm_step(DualIterate(d, [np.array([0.5, -0.5])]), 0)
        npt.assert_allclose(y.blocks[0], [0.0, 0.0])

    def test_optimum_is_a_fixed_point(self):
        d = edge_modular_instance()
        for i in range(d.r):
            y = rcdm_step(edge_modular_optimum(d), i)
            npt.assert_allclose(y.dense(), edge_modular_optimum(d).dense(), atol=1e-15)

    def test_block_index_checked(self):
        d = two_edge_instance()
        with self.assertRaises(InvalidInputError):
            rcdm_step(DualIterate.initial(d), 2)

    def test_steps_never_increase_objective(self):
        d = random_decomposition(SyntheticSpec(n=8, r=4, seed=5))
        y = random_feasible_point(d, make_rng(5, "start"))
        rng = make_rng(5, "steps")
        for _ in range(300):
            before = y.g()
            rcdm_step(y, int(rng.integers(d.r)))
            self.assertLessEqual(y.g(), before + 1e-12)
        self.assertTrue(y.is_feasible())

    def test_run_converges_on_two_edge_instance(self):
        d = two_edge_instance()
        y, trace = rcdm_run(d, SolverConfig(trace_every=1), two_edge_start(d))
        self.assertTrue(trace.converged)
        self.assertEqual(trace.stop_reason, "gap_tol")
        self.assertEqual([r.projections for r in trace.records], [0, 1])
        self.assertAlmostEqual(trace.records[0].nu_s, 16.0)
        self.assertEqual(y.g(), 0.0)

    def test_modular_only_starts_at_optimum(self):
        d = modular_only_instance()
        y, trace = rcdm_run(d, SolverConfig())
        self.assertTrue(trace.converged)
        npt.assert_allclose(y.dense(), np.array([block.w for block in d.blocks]))

    def test_runs_are_reproducible(self):
        d = random_decomposition(SyntheticSpec(n=6, r=3, seed=3))
        config = SolverConfig(seed=9, max_projections=500, gap_tol=0.0, trace_every=50)
        y1, trace1 = rcdm_run(d, config)
        y2, trace2 = rcdm_run(d, config)
        npt.assert_array_equal(y1.dense(), y2.dense())
        self.assertEqual([(r.projections, r.nu_s, r.nu_d, r.g) for r in trace1.records],
                         [(r.projections, r.nu_s, r.nu_d, r.g) for r in trace2.records])

    def test_budget_exhaustion_is_reported_not_raised(self):
        # unsaturated path: block coordinate steps halve the error and never land exactly
        d = Decomposition(3, [EdgeCutBlock(3, 0, 1, 10.0), EdgeCutBlock(3, 1, 2, 10.0),
                              ModularBlock([1.0, 0.0, -1.0])])
        with self.assertLogs("core.solvers", level="WARNING") as logs:
            _, trace = rcdm_run(d, SolverConfig(max_projections=10, gap_tol=0.0, trace_every=4))
        self.assertFalse(trace.converged)
        self.assertEqual(trace.stop_reason, "budget")
        self.assertEqual([r.projections for r in trace.records], [0, 4, 8, 10])
        self.assertTrue(any("budget" in line for line in logs.output))

    def test_discrete_recovery_matches_brute_force(self):
        for seed in range(1, 6):
            d = random_decomposition(SyntheticSpec(n=6, r=3, seed=seed))
            y, trace = rcdm_run(d, SolverConfig(seed=seed, gap_tol=1e-10, max_projections=200_000, trace_every=50))
            self.assertTrue(trace.converged)
            _, value = best_level_set(d.oracle, y.primal())
            self.assertAlmostEqual(value, brute_force_min(d.oracle)[1], places=9)


class GapMonitorTest(unittest.TestCase):

    def test_record_cadence(self):
        d = edge_modular_instance()
        monitor = GapMonitor(d, SolverConfig(trace_every=10, gap_tol=0.0), "rcdm")
        y = DualIterate.initial(d)
        self.assertTrue(monitor.due(0))
        self.assertFalse(monitor.observe(y, 0))
        self.assertFalse(monitor.due(9))
        self.assertTrue(monitor.due(10))
        monitor.observe(y, 13)
        self.assertFalse(monitor.due(19))
        self.assertTrue(monitor.due(20))

    def test_discrete_certificate_stops_run(self):
        d = edge_modular_instance()
        monitor = GapMonitor(d, SolverConfig(stop_on_discrete=True, gap_tol=1e-12), "rcdm")
        y = DualIterate(d, [np.array([-0.4, 0.4]), np.array([0.3, -0.8])])
        self.assertGreater(smooth_gap(d, y), 0.1)
        self.assertTrue(monitor.observe(y, 0))
        self.assertEqual(monitor.trace.stop_reason, "discrete_certified")
        self.assertFalse(monitor.trace.converged)


class ApproxTest(unittest.TestCase):

    def test_theta_recurrence(self):
        self.assertAlmostEqual(next_theta(0.5), (math.sqrt(1.0625) - 0.25) / 2.0, places=15)
        self.assertAlmostEqual(next_theta(0.5), 0.3903882, places=7)
        theta = 1.0 / 3.0
        for _ in range(50):
            following = next_theta(theta)
            self.assertLess(following, theta)
            self.assertAlmostEqual(following ** 2, (1.0 - following) * theta ** 2, places=15)
            theta = following

    def test_single_block_is_proximal_gradient_step(self):
        d = Decomposition(2, [EdgeCutBlock(2, 0, 1, 1.0)])
        thetas = []
        y = approx_run(d, DualIterate(d, [np.array([0.5, -0.5])]), 1, make_rng(0, "approx"), thetas)
        npt.assert_allclose(y.blocks[0], [0.25, -0.25])
        self.assertEqual(thetas, [1.0])

    def test_output_is_feasible(self):
        d = random_decomposition(SyntheticSpec(n=6, r=4, seed=6))
        for seed in range(5):
            rng = make_rng(seed, "approx-feasible")
            z0 = random_feasible_point(d, rng)
            y = approx_run(d, z0, 40, rng)
            self.assertTrue(y.is_feasible(tol=1e-8))

    def test_needs_one_iteration(self):
        d = two_edge_instance()
        with self.assertRaises(InvalidInputError):
            approx_run(d, DualIterate.initial(d), 0, make_rng(0))


class AcdmTest(unittest.TestCase):

    def test_epoch_length(self):
        self.assertEqual(epoch_length(two_edge_instance()), 24)
        single = Decomposition(3, [EdgeCutBlock(3, 0, 2, 1.0)])
        self.assertEqual(epoch_length(single), 13)
        self.assertEqual(epoch_length(single, SolverConfig(epoch_length=5)), 5)

    def test_converges_and_records_theta(self):
        d = edge_modular_instance()
        y, trace = acdm_run(d, SolverConfig(seed=4, gap_tol=1e-10, trace_every=10, record_theta=True))
        self.assertTrue(trace.converged)
        self.assertTrue(y.is_feasible())
        npt.assert_allclose(y.dense(), edge_modular_optimum(d).dense(), atol=1e-4)
        self.assertEqual(trace.thetas[0], 0.5)
        self.assertEqual(trace.records[0].projections, 0)

    def test_discrete_recovery_matches_brute_force(self):
        for seed in range(1, 4):
            d = random_decomposition(SyntheticSpec(n=6, r=3, seed=seed))
            y, trace = acdm_run(d, SolverConfig(seed=seed, gap_tol=1e-10, max_projections=300_000, trace_every=50))
            self.assertTrue(trace.converged)
            _, value = best_level_set(d.oracle, y.primal())
            self.assertAlmostEqual(value, brute_force_min(d.oracle)[1], places=9)


class AlternatingProjectionsTest(unittest.TestCase):

    def test_modular_only_is_exact_after_one_iteration(self):
        d = modular_only_instance()
        y = project_product(d, np.zeros((d.r, d.n)))
        npt.assert_array_equal(y.dense(), np.array([block.w for block in d.blocks]))
        _, trace = ap_run(d, SolverConfig())
        self.assertTrue(trace.converged)

    def test_two_edge_limit_matches_rcdm(self):
        d = two_edge_instance()
        y, trace = ap_run(d, SolverConfig())
        self.assertEqual(y.g(), 0.0)
        self.assertTrue(trace.converged)

    def test_converges_to_fixed_point(self):
        d = edge_modular_instance()
        y, trace = ap_run(d, SolverConfig(gap_tol=1e-12, trace_every=2))
        self.assertTrue(trace.converged)
        self.assertEqual(trace.records[1].projections, 2)
        npt.assert_allclose(y.dense(), edge_modular_optimum(d).dense(), atol=1e-6)
        y_residual, a_residual = ap_fixed_point_residuals(d, y)
        self.assertLess(y_residual, 1e-6)
        self.assertLess(a_residual, 1e-6)

    def test_start_must_have_zero_sum(self):
        d = edge_modular_instance()
        with self.assertRaises(InvalidInputError):
            ap_run(d, SolverConfig(), np.ones((2, 2)))
        with self.assertRaises(InvalidInputError):
            ap_run(d, SolverConfig(), np.zeros((3, 2)))

    def test_dispatch(self):
        d = edge_modular_instance()
        for kind in SolverKind:
            _, trace = run_solver(kind, d, SolverConfig(seed=1, gap_tol=1e-9, trace_every=5))
            self.assertEqual(trace.solver, kind.value)
            self.assertTrue(trace.converged)


class TerminationCertificateTest(unittest.TestCase):
    """Every solver ends with both gaps closed and the brute-force optimum recovered."""

    def test_random_instances(self):
        for seed in range(200):
            spec = SyntheticSpec(n=4 + seed % 5, r=2 + seed % 3, seed=seed)
            d = random_decomposition(spec)
            _, best = brute_force_min(d.oracle)
            for kind in SolverKind:
                with self.subTest(seed=seed, solver=kind.value):
                    config = SolverConfig(seed=seed, gap_tol=1e-6, max_projections=100_000)
                    y, trace = run_solver(kind, d, config)
                    self.assertTrue(trace.converged)
                    self.assertLessEqual(trace.last.nu_s, config.gap_tol)
                    self.assertLessEqual(trace.last.nu_d, config.discrete_tol)
                    self.assertAlmostEqual(discrete_certificate(d, y).value, best, places=9)

    def test_small_smooth_gap_alone_does_not_stop_a_run(self):
        # optimum sum is 0; at t = -0.5 + eps both gaps equal eps to first order
        d = Decomposition(2, [EdgeCutBlock(2, 0, 1, 1.0), ModularBlock([0.5, -0.5])])
        monitor = GapMonitor(d, SolverConfig(gap_tol=1e-3), "acdm")
        eps = 1e-4
        y = DualIterate(d, [np.array([-0.5 + eps, 0.5 - eps]), np.array([0.5, -0.5])])
        self.assertAlmostEqual(smooth_gap(d, y), eps + 2 * eps * eps, places=12)
        self.assertAlmostEqual(discrete_gap(d, y), eps, places=12)
        self.assertFalse(monitor.observe(y, 0))
        self.assertFalse(monitor.trace.converged)
        optimum = DualIterate(d, [np.array([-0.5, 0.5]), np.array([0.5, -0.5])])
        self.assertTrue(monitor.observe(optimum, 10))
        self.assertTrue(monitor.trace.converged)
        self.assertEqual(monitor.trace.stop_reason, "gap_tol")


if __name__ == '__main__':
    unittest.main()
