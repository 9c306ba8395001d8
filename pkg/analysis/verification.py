#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Empirical checks of the analytical guarantees behind the solvers.

Each check returns a VerificationReport. A check that needs the unique
proximal optimum y* first certifies it by multi-start agreement and reports
``skipped`` when the optimum cannot be certified unique. Every check is
deterministic in (seed, trials): trial t of claim c draws from
``make_rng(seed, c, instance, t)``, and sums over trials use math.fsum so the
result does not depend on the order trials are aggregated in.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.decomposition import Decomposition, DualIterate, project_zero_sum, random_feasible_point
from core.duality import dual_value, discrete_gap, primal_value, smooth_gap
from core.instances import builtin_instances, chain_instance, edge_modular_instance
from core.models import ClaimStatus, VerificationReport, VerifySuite
from core.solvers import _approx_iterations, epoch_length, rcdm_step
from utils.rng import make_rng

logger = logging.getLogger(__name__)

MC_SIGMAS = 3.0
ENVELOPE_SLACK = 0.1
THEOREM1_TOL = 1e-9
WEAK_DUALITY_TOL = 1e-12
CONVERGED_GAP = 1e-8
STRONG_DUALITY_TOL = 1e-6
IDENTITY_TOL = 1e-10
CERTIFY_GAP = 1e-12
CERTIFY_AGREEMENT = 1e-6
CERTIFY_STARTS = 10
MC_CHUNK = 10_000

Dense = Union[DualIterate, np.ndarray]


def _as_dense(y: Dense) -> np.ndarray:
    return y.dense() if isinstance(y, DualIterate) else np.asarray(y, dtype=float)


def _report(claim_id: str, trials: int, margins: Sequence[float], tolerance: float, detail: str = "",
            violations: Optional[int] = None) -> VerificationReport:
    """Margins are slack values; a margin below -tolerance is a violation."""
    margins = list(margins)
    if violations is None:
        violations = sum(1 for m in margins if m < -tolerance)
    worst = min(margins) if margins else float("inf")
    status = ClaimStatus.FAILED if violations else ClaimStatus.PASSED
    report = VerificationReport(claim_id=claim_id, status=status, trials=trials, violations=violations,
                                worst_margin=worst, tolerance=tolerance, detail=detail)
    log = logger.warning if violations else logger.info
    log(f"{claim_id}: {status.value}, {violations}/{trials} violations, worst margin {worst:.3e}")
    return report


def _skipped(claim_id: str, detail: str) -> VerificationReport:
    logger.warning(f"{claim_id}: skipped ({detail})")
    return VerificationReport(claim_id=claim_id, status=ClaimStatus.SKIPPED, detail=detail)


# ---------------------------------------------------------------- ESO

def eso_bound(x: np.ndarray, h: np.ndarray) -> float:
    """g(x) + <grad g(x), h> / r + 2 ||h||^2 / r."""
    r = x.shape[0]
    s = x.sum(axis=0)
    return float(s @ s + 2.0 * (s @ h.sum(axis=0)) / r + 2.0 * np.sum(h * h) / r)


def eso_expectation(x: np.ndarray, h: np.ndarray) -> float:
    """Exact E[g(x + h_R)] when every block joins R independently with probability 1/r."""
    r = x.shape[0]
    s = x.sum(axis=0)
    H = h.sum(axis=0)
    own = float(np.sum(h * h))
    cross = float(H @ H) - own
    return float(s @ s + 2.0 * (s @ H) / r + own / r + cross / r ** 2)


def eso_monte_carlo(x: np.ndarray, h: np.ndarray, samples: int, rng: np.random.Generator):
    """Sample mean and standard error of g(x + h_R)."""
    r = x.shape[0]
    s = x.sum(axis=0)
    sums, squares = [], []
    remaining = samples
    while remaining > 0:
        chunk = min(MC_CHUNK, remaining)
        masks = (rng.random((chunk, r)) < 1.0 / r).astype(float)
        values = np.sum((s + masks @ h) ** 2, axis=1)
        sums.append(math.fsum(values))
        squares.append(math.fsum(values * values))
        remaining -= chunk
    mean = math.fsum(sums) / samples
    variance = max(math.fsum(squares) / samples - mean * mean, 0.0)
    return mean, math.sqrt(variance / samples)


def _eso_margins(x: np.ndarray, h: np.ndarray, samples: int, rng: np.random.Generator
                 ) -> Tuple[List[float], int, str]:
    bound = eso_bound(x, h)
    exact = eso_expectation(x, h)
    tol = IDENTITY_TOL * max(1.0, abs(bound))
    margins = [(bound - exact) / max(1.0, abs(bound))]
    violations = int(exact > bound + tol)
    detail = f"bound={bound:.12g} exact={exact:.12g}"
    if samples > 0:
        mean, stderr = eso_monte_carlo(x, h, samples, rng)
        allowance = MC_SIGMAS * stderr + tol
        margins.append((bound + allowance - mean) / max(1.0, abs(bound)))
        if mean > bound + allowance or abs(mean - exact) > allowance:
            violations += 1
        detail += f" mc_mean={mean:.12g} stderr={stderr:.3e}"
    return margins, violations, detail


def eso_check(d: Decomposition, x: Dense, h: Dense, trials: int, rng: np.random.Generator) -> VerificationReport:
    """Closed-form expectation against the overapproximation, plus a Monte Carlo estimate of `trials` samples."""
    margins, violations, detail = _eso_margins(_as_dense(x), _as_dense(h), trials, rng)
    return _report(f"eso:{d.name}", max(trials, 1), margins, IDENTITY_TOL, detail, violations=violations)


def eso_suite(d: Decomposition, pairs: int, samples: int, seed: int) -> VerificationReport:
    """Closed-form inequality on `pairs` random (x, h); Monte Carlo on the first pair."""
    margins: List[float] = []
    violations = 0
    for t in range(pairs):
        rng = make_rng(seed, "eso", d.name, t)
        x = rng.standard_normal((d.r, d.n))
        h = rng.standard_normal((d.r, d.n))
        pair_margins, pair_violations, _ = _eso_margins(x, h, samples if t == 0 else 0, rng)
        margins.extend(pair_margins)
        violations += pair_violations
    return _report(f"eso:{d.name}", pairs, margins, IDENTITY_TOL,
                   f"{pairs} pairs, {samples} Monte Carlo samples", violations=violations)


# ---------------------------------------------------------------- unique optimum

def polish(d: Decomposition, y: DualIterate, rng: np.random.Generator, steps: int,
           lipschitz: float = 2.0) -> DualIterate:
    for _ in range(steps):
        rcdm_step(y, int(rng.integers(d.r)), lipschitz)
    return y


def certify_unique_optimum(d: Decomposition, seed: int = 0, starts: int = CERTIFY_STARTS) -> Optional[DualIterate]:
    """y* if RCDM from `starts` random feasible points converges to one point, else None."""
    steps = 2000 + 500 * d.n * d.r
    reference: Optional[DualIterate] = None
    for k in range(starts):
        rng = make_rng(seed, "certify", d.name, k)
        y = polish(d, random_feasible_point(d, rng), rng, steps)
        y.refresh_sum()
        gap = smooth_gap(d, y)
        if gap > CERTIFY_GAP:
            logger.info(f"{d.name}: start {k} reached only nu_s={gap:.3e}; optimum not certified")
            return None
        if reference is None:
            reference = y
        elif reference.distance(y) > CERTIFY_AGREEMENT:
            logger.info(f"{d.name}: starts disagree by {reference.distance(y):.3e}; optimum not unique")
            return None
    logger.debug(f"{d.name}: unique optimum certified from {starts} starts")
    return reference


# ---------------------------------------------------------------- condition bound

def theorem1_check(d: Decomposition, trials: int, rng: np.random.Generator,
                   y_star: Optional[DualIterate] = None, seed: int = 0) -> VerificationReport:
    """||S(y - y*)|| >= ||y - y*|| / (n r) on random feasible y, ||S v|| = ||sum_i v_i|| / sqrt(r)."""
    claim = f"theorem1:{d.name}"
    y_star = y_star if y_star is not None else certify_unique_optimum(d, seed)
    if y_star is None:
        return _skipped(claim, "optimum not certified unique")
    star_dense = y_star.dense()
    margins = []
    for _ in range(trials):
        diff = random_feasible_point(d, rng).dense() - star_dense
        lhs = float(np.linalg.norm(diff.sum(axis=0))) / math.sqrt(d.r)
        rhs = float(np.linalg.norm(diff)) / (d.n * d.r)
        margins.append(lhs - rhs)
    if not margins:
        return _skipped(claim, "no trials requested")
    return _report(claim, trials, margins, THEOREM1_TOL)


# ---------------------------------------------------------------- duality

def _duality_margins(d: Decomposition, y: DualIterate) -> Tuple[List[float], str]:
    x = y.primal()
    primal = primal_value(d, x)
    dual = dual_value(y)
    nu_s = smooth_gap(d, y)
    nu_d = discrete_gap(d, y)
    margins = [primal - dual, nu_s, nu_d]
    if nu_s <= CONVERGED_GAP:
        # at convergence the gap closes: primal = -(1/2)||sum_i y_i||^2
        margins.append(STRONG_DUALITY_TOL - WEAK_DUALITY_TOL - abs(primal + 0.5 * y.g()))
    return margins, f"primal={primal:.12g} dual={dual:.12g} nu_s={nu_s:.3e} nu_d={nu_d:.3e}"


def duality_check(d: Decomposition, y: DualIterate) -> VerificationReport:
    """Weak duality everywhere; primal = -dual once nu_s <= CONVERGED_GAP."""
    margins, detail = _duality_margins(d, y)
    return _report(f"duality:{d.name}", 1, margins, WEAK_DUALITY_TOL, detail)


def duality_suite(d: Decomposition, trials: int, seed: int) -> VerificationReport:
    """Weak duality on random feasible points plus strong duality at a polished iterate."""
    points = [random_feasible_point(d, make_rng(seed, "duality", d.name, t)) for t in range(trials)]
    rng = make_rng(seed, "duality", d.name, "converged")
    converged = polish(d, DualIterate.initial(d), rng, 2000 + 500 * d.n * d.r)
    converged.refresh_sum()
    points.append(converged)
    margins: List[float] = []
    for y in points:
        margins.extend(_duality_margins(d, y)[0])
    return _report(f"duality:{d.name}", len(points), margins, WEAK_DUALITY_TOL,
                   f"converged nu_s={smooth_gap(d, converged):.3e}")


# ---------------------------------------------------------------- zero-sum geometry

def affine_distance(y: np.ndarray, target_sum: np.ndarray) -> float:
    """Distance from y to {q : sum_i q_i = target_sum}, by minimum-norm least squares."""
    r, n = y.shape
    A = np.tile(np.eye(n), r)
    delta, *_ = np.linalg.lstsq(A, target_sum - y.sum(axis=0), rcond=None)
    return float(np.linalg.norm(delta))


def _appendix_b_margins(y: np.ndarray, p: np.ndarray) -> List[float]:
    """Relative slack of each identity; negative means the identity broke beyond IDENTITY_TOL."""
    r = y.shape[0]
    scale = max(1.0, float(np.abs(y).max(initial=0.0)), float(np.abs(p).max(initial=0.0)))
    errors = []

    a = project_zero_sum(y)
    errors.append(np.abs(project_zero_sum(a) - a).max(initial=0.0))
    residual = y - a
    errors.append(np.abs(residual - residual[0]).max(initial=0.0))
    errors.append(np.abs(a.sum(axis=0)).max(initial=0.0))

    # S S^T = I: replicate the block mean, sum the replicas, recover the sum
    mean = y.mean(axis=0)
    errors.append(np.abs(np.tile(mean, (r, 1)).sum(axis=0) - y.sum(axis=0)).max(initial=0.0))

    formula = float(np.linalg.norm((y - p).sum(axis=0))) / math.sqrt(r)
    errors.append(abs(affine_distance(y, p.sum(axis=0)) - formula))
    return [IDENTITY_TOL - float(e) / scale for e in errors]


def appendix_b_check(y: Dense, p: Optional[Dense] = None, rng: Optional[np.random.Generator] = None
                     ) -> VerificationReport:
    """Identities of the zero-sum projection and of the distance to a shifted block-sum subspace."""
    y_arr = _as_dense(y)
    if p is None:
        rng = rng or make_rng(0, "appendixb")
        p = rng.standard_normal(y_arr.shape)
    return _report("appendixb", 1, _appendix_b_margins(y_arr, _as_dense(p)), 0.0)


def appendix_b_suite(d: Decomposition, trials: int, seed: int) -> VerificationReport:
    margins: List[float] = []
    for t in range(trials):
        rng = make_rng(seed, "appendixb", d.name, t)
        y = random_feasible_point(d, rng).dense() if t % 2 == 0 else rng.standard_normal((d.r, d.n))
        margins.extend(_appendix_b_margins(y, rng.standard_normal((d.r, d.n))))
    return _report(f"appendixb:{d.name}", trials, margins, 0.0)


# ---------------------------------------------------------------- rate envelopes

def _column_means(rows: List[List[float]]) -> List[float]:
    return [math.fsum(column) / len(column) for column in zip(*rows)]


def rcdm_envelope(d: Decomposition, k: int) -> float:
    return (1.0 - 2.0 / (d.n ** 2 * d.r ** 2 + d.r)) ** k


def approx_envelope(d: Decomposition, k: int, initial_gap: float, initial_distance_sq: float) -> float:
    r = d.r
    return 4.0 * r * r / (k - 1 + 2 * r) ** 2 * ((1.0 - 1.0 / r) * initial_gap + 2.0 * initial_distance_sq)


def rate_check(d: Decomposition, solver: str, seeds: int, iters: int, seed: int = 0, lipschitz: float = 2.0,
               y_star: Optional[DualIterate] = None) -> VerificationReport:
    """Sample-mean convergence against the expected-rate envelope of rcdm, acdm (per epoch) or approx."""
    claim = f"rate:{solver}:{d.name}"
    y_star = y_star if y_star is not None else certify_unique_optimum(d, seed)
    if y_star is None:
        return _skipped(claim, "optimum not certified unique")
    g_star = y_star.g()
    y0 = DualIterate.initial(d)
    initial_gap = y0.g() - g_star
    initial_distance_sq = y0.distance(y_star) ** 2

    rows: List[List[float]] = []
    for s in range(seeds):
        rng = make_rng(seed, "rate", solver, d.name, s)
        if solver == "rcdm":
            y = y0.copy()
            row = [initial_distance_sq + initial_gap]
            for _ in range(iters):
                rcdm_step(y, int(rng.integers(d.r)), lipschitz)
                row.append(y.distance(y_star) ** 2 + y.g() - g_star)
        elif solver == "acdm":
            y = y0.copy()
            row = [initial_gap]
            for epoch in range(iters):
                y = _approx_iterations(d, y, epoch_length(d), make_rng(seed, "rate", solver, d.name, s, epoch))
                row.append(y.g() - g_star)
        elif solver == "approx":
            row = []

            def record(_: int, current: Callable[[], DualIterate]) -> bool:
                row.append(current().g() - g_star)
                return False

            _approx_iterations(d, y0, iters, rng, observer=record)
        else:
            raise ValueError(f"Unknown solver for rate check: {solver}")
        rows.append(row)

    means = _column_means(rows)
    if solver == "rcdm":
        envelope = [rcdm_envelope(d, k) * means[0] for k in range(len(means))]
    elif solver == "acdm":
        envelope = [0.5 ** k * means[0] for k in range(len(means))]
    else:
        envelope = [approx_envelope(d, k + 1, initial_gap, initial_distance_sq) for k in range(len(means))]
    margins = [(1.0 + ENVELOPE_SLACK) * bound - mean for bound, mean in zip(envelope, means)]
    tol = IDENTITY_TOL * max(1.0, abs(means[0]) if means else 1.0)
    return _report(claim, seeds, margins, tol, f"{len(means)} checkpoints, lipschitz={lipschitz:g}")


# ---------------------------------------------------------------- suites

def run_verification_suites(suite: VerifySuite, seed: int = 0, trials: int = 100_000, lipschitz: float = 2.0,
                            rate_seeds: int = 200) -> List[VerificationReport]:
    selected = {suite} if suite is not VerifySuite.ALL else set(VerifySuite) - {VerifySuite.ALL}
    reports: List[VerificationReport] = []

    if VerifySuite.ESO in selected:
        for d in builtin_instances():
            reports.append(eso_suite(d, pairs=1000, samples=trials, seed=seed))
    if VerifySuite.THEOREM1 in selected:
        for d in builtin_instances()[:4]:
            reports.append(theorem1_check(d, 1000, make_rng(seed, "theorem1", d.name), seed=seed))
    if VerifySuite.DUALITY in selected:
        for d in builtin_instances():
            reports.append(duality_suite(d, trials=1000, seed=seed))
    if VerifySuite.APPENDIXB in selected:
        for d in builtin_instances():
            reports.append(appendix_b_suite(d, trials=200, seed=seed))
    if VerifySuite.RATE in selected:
        for d in (edge_modular_instance(), chain_instance()):
            y_star = certify_unique_optimum(d, seed)
            reports.append(rate_check(d, "rcdm", rate_seeds, 200, seed, lipschitz, y_star))
            reports.append(rate_check(d, "acdm", rate_seeds, 5, seed, lipschitz, y_star))
            reports.append(rate_check(d, "approx", rate_seeds, 4 * d.r * d.n, seed, lipschitz, y_star))
    return reports
