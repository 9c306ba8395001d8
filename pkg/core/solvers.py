#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Solvers for min over y_i in B(F_i) of ||sum_i y_i||^2.

All three methods are measured in base-polytope projections: RCDM spends one
per iteration, APPROX/ACDM one per sampled block (one on average) and
alternating projections r per iteration. Gap records are taken every
``trace_every`` projections, and stopping is only decided at those points.
A run converges once nu_s <= gap_tol and nu_d <= discrete_tol hold at the
same record.
"""

import logging
import math
import time
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.decomposition import Decomposition, DualIterate, project_product, project_zero_sum
from core.duality import discrete_gap, smooth_gap
from core.exceptions import InvalidInputError
from core.models import GapRecord, GapTrace, SolverConfig, SolverKind
from utils.rng import make_rng

logger = logging.getLogger(__name__)

SolverResult = Tuple[DualIterate, GapTrace]


class GapMonitor:
    """Records (nu_s, nu_d, g) on a projection schedule and decides when a run stops."""

    def __init__(self, decomposition: Decomposition, config: SolverConfig, solver: str):
        self.decomposition = decomposition
        self.config = config
        self.trace = GapTrace(solver=solver)
        self.stopped = False
        self._next_record = 0
        self._start = time.perf_counter()

    def due(self, projections: int) -> bool:
        return projections >= self._next_record

    def observe(self, y: DualIterate, projections: int) -> bool:
        """Append a record for y; True once a stopping criterion holds."""
        nu_s = smooth_gap(self.decomposition, y)
        nu_d = discrete_gap(self.decomposition, y)
        g = y.g()
        if not all(math.isfinite(v) for v in (nu_s, nu_d, g)):
            logger.warning(f"{self.trace.solver}: non-finite gap values at {projections} projections")
        self.trace.append(GapRecord(projections=projections, nu_s=nu_s, nu_d=nu_d, g=g,
                                    seconds=time.perf_counter() - self._start))
        self._next_record = (projections // self.config.trace_every + 1) * self.config.trace_every
        logger.debug(f"{self.trace.solver}: projections={projections} nu_s={nu_s:.6e} nu_d={nu_d:.6e} g={g:.6e}")

        certified = nu_d <= self.config.discrete_tol
        if nu_s <= self.config.gap_tol and certified:
            self.trace.converged = True
            self.trace.stop_reason = "gap_tol"
            self.stopped = True
        elif nu_s <= self.config.gap_tol:
            logger.debug(f"{self.trace.solver}: nu_s below gap_tol, continuing until nu_d <= "
                         f"{self.config.discrete_tol:.1e}")
        elif self.config.stop_on_discrete and certified:
            self.trace.stop_reason = "discrete_certified"
            self.stopped = True
        return self.stopped

    def finish(self, y: DualIterate, projections: int) -> GapTrace:
        last = self.trace.last
        if last is None or last.projections < projections:
            self.observe(y, projections)
        if not self.stopped:
            self.trace.stop_reason = "budget"
            logger.warning(f"{self.trace.solver}: budget of {self.config.max_projections} projections exhausted "
                           f"at nu_s={self.trace.last.nu_s:.6e} (gap_tol {self.config.gap_tol:.1e})")
        logger.info(f"{self.trace.solver}: finished after {projections} projections ({self.trace.stop_reason}), "
                    f"nu_s={self.trace.last.nu_s:.6e} nu_d={self.trace.last.nu_d:.6e}")
        return self.trace


def _starting_point(decomposition: Decomposition, y0: Optional[DualIterate]) -> DualIterate:
    if y0 is None:
        return DualIterate.initial(decomposition)
    if y0.decomposition is not decomposition:
        raise InvalidInputError("Starting point belongs to a different decomposition")
    return y0.copy()


def rcdm_step(state: DualIterate, i: int, lipschitz: float = 2.0) -> DualIterate:
    """Prox step on block i: y_i <- Pi_{B(F_i)}(y_i - grad_i g(y) / L). Updates state in place."""
    if not 0 <= i < state.decomposition.r:
        raise InvalidInputError(f"Block index {i} out of range for r={state.decomposition.r}")
    block = state.decomposition.blocks[i]
    target = state.blocks[i] - state.block_gradient(i) / lipschitz
    state.update_block(i, block.project_local(target))
    return state


def rcdm_run(decomposition: Decomposition, config: SolverConfig, y0: Optional[DualIterate] = None) -> SolverResult:
    y = _starting_point(decomposition, y0)
    rng = make_rng(config.seed, "rcdm")
    monitor = GapMonitor(decomposition, config, SolverKind.RCDM.value)
    logger.info(f"rcdm: starting on {decomposition} with budget {config.max_projections}")

    projections = 0
    if not monitor.observe(y, 0):
        while projections < config.max_projections:
            rcdm_step(y, int(rng.integers(decomposition.r)), config.lipschitz)
            projections += 1
            if monitor.due(projections) and monitor.observe(y, projections):
                break
    return y, monitor.finish(y, projections)


def next_theta(theta: float) -> float:
    theta_sq = theta * theta
    return (math.sqrt(theta_sq * theta_sq + 4.0 * theta_sq) - theta_sq) / 2.0


def _combine(theta: float, u: DualIterate, z: DualIterate) -> DualIterate:
    scale = theta * theta
    return DualIterate(z.decomposition, [scale * ub + zb for ub, zb in zip(u.blocks, z.blocks)])


# (projections spent in the iteration, builder of the current output point) -> stop?
IterationObserver = Callable[[int, Callable[[], DualIterate]], bool]


def _approx_iterations(decomposition: Decomposition, z0: DualIterate, iterations: int, rng: np.random.Generator,
                       observer: Optional[IterationObserver] = None,
                       thetas: Optional[List[float]] = None) -> DualIterate:
    r = decomposition.r
    z = z0.copy()
    # u is bookkeeping only; it need not be feasible
    u = DualIterate(decomposition, [np.zeros(block.support.size) for block in decomposition.blocks])
    theta = 1.0 / r
    last_theta = theta

    for k in range(iterations):
        selected = np.flatnonzero(rng.random(r) < 1.0 / r)
        # every block of R_k sees the gradient at the iteration-start point
        point_sum = theta * theta * u.total + z.total
        step = 4.0 * r * theta
        u_scale = (1.0 - r * theta) / (theta * theta)
        for i in selected:
            block = decomposition.blocks[i]
            z_old = z.blocks[i]
            z_new = block.project_local(z_old - 2.0 * point_sum[block.support] / step)
            t = z_new - z_old
            z.update_block(i, z_new)
            u.update_block(i, u.blocks[i] - u_scale * t)

        last_theta = theta
        if thetas is not None:
            thetas.append(theta)
        logger.debug(f"approx: k={k} theta={theta:.12g} |R_k|={selected.size}")
        theta = next_theta(theta)

        if observer is not None and observer(int(selected.size), lambda: _combine(last_theta, u, z)):
            break

    return _combine(last_theta, u, z)


def approx_run(decomposition: Decomposition, z0: DualIterate, iterations: int,
               rng: np.random.Generator, thetas: Optional[List[float]] = None) -> DualIterate:
    """Accelerated block-sampling scheme started at z0; returns theta^2 u + z with the last theta used."""
    if iterations < 1:
        raise InvalidInputError(f"APPROX needs at least one iteration, got {iterations}")
    return _approx_iterations(decomposition, z0, iterations, rng, thetas=thetas)


def epoch_length(decomposition: Decomposition, config: Optional[SolverConfig] = None) -> int:
    if config is not None and config.epoch_length is not None:
        return config.epoch_length
    return math.ceil(4 * decomposition.n * decomposition.r ** 1.5) + 1


def acdm_run(decomposition: Decomposition, config: SolverConfig, y0: Optional[DualIterate] = None) -> SolverResult:
    y = _starting_point(decomposition, y0)
    monitor = GapMonitor(decomposition, config, SolverKind.ACDM.value)
    length = epoch_length(decomposition, config)
    thetas = monitor.trace.thetas if config.record_theta else None
    logger.info(f"acdm: starting on {decomposition} with epochs of {length} iterations")

    projections = 0
    epoch = 0

    def observer(spent: int, current: Callable[[], DualIterate]) -> bool:
        nonlocal projections
        projections += spent
        if monitor.due(projections) and monitor.observe(current(), projections):
            return True
        return projections >= config.max_projections

    if not monitor.observe(y, 0):
        while not monitor.stopped and projections < config.max_projections:
            rng = make_rng(config.seed, "acdm", epoch)
            y = _approx_iterations(decomposition, y, length, rng, observer, thetas)
            logger.debug(f"acdm: epoch {epoch} done at {projections} projections, g={y.g():.6e}")
            epoch += 1
    return y, monitor.finish(y, projections)


def _check_zero_sum(a: np.ndarray, tol: float = 1e-9) -> None:
    residual = np.abs(a.sum(axis=0))
    if np.any(residual > tol * max(1.0, float(np.abs(a).max(initial=0.0)))):
        raise InvalidInputError("AP start must have zero block sum")


def ap_run(decomposition: Decomposition, config: SolverConfig, a0: Optional[np.ndarray] = None) -> SolverResult:
    """Alternating projections between the product of base polytopes and {a : sum_i a_i = 0}."""
    r, n = decomposition.r, decomposition.n
    if a0 is None:
        a = np.zeros((r, n))
    else:
        a = np.asarray(a0, dtype=float)
        if a.shape != (r, n):
            raise InvalidInputError(f"AP start must have shape ({r}, {n}), got {a.shape}")
        _check_zero_sum(a)
    monitor = GapMonitor(decomposition, config, SolverKind.AP.value)
    logger.info(f"ap: starting on {decomposition}, {r} projections per iteration")

    y = DualIterate.initial(decomposition)
    projections = 0
    if not monitor.observe(y, 0):
        while projections < config.max_projections:
            y = project_product(decomposition, a)
            projections += r
            if monitor.due(projections) and monitor.observe(y, projections):
                break
            a = project_zero_sum(y)

    if projections:
        y_residual, a_residual = ap_fixed_point_residuals(decomposition, y)
        logger.debug(f"ap: fixed-point residuals |Pi_A(y) - a|={a_residual:.3e} |Pi_Y(a) - y|={y_residual:.3e}")
    return y, monitor.finish(y, projections)


def ap_fixed_point_residuals(decomposition: Decomposition, y: DualIterate) -> Tuple[float, float]:
    """(||Pi_Y(Pi_A(y)) - y||, ||Pi_A(Pi_Y(Pi_A(y))) - Pi_A(y)||); both vanish at an AP fixed point."""
    a = project_zero_sum(y)
    y_next = project_product(decomposition, a)
    a_next = project_zero_sum(y_next)
    return float(np.linalg.norm(y_next.dense() - y.dense())), float(np.linalg.norm(a_next - a))


SOLVERS: Dict[SolverKind, Callable[[Decomposition, SolverConfig], SolverResult]] = {
    SolverKind.RCDM: rcdm_run,
    SolverKind.ACDM: acdm_run,
    SolverKind.AP: ap_run,
}


def run_solver(kind: SolverKind, decomposition: Decomposition, config: SolverConfig) -> SolverResult:
    return SOLVERS[kind](decomposition, config)
