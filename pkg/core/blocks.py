#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Simple-function blocks F_i with fast projections onto their base polytopes.

A block stores its sparse support (the elements F_i depends on). Its base
polytope lives in the support coordinates, with 0 everywhere else, so the
solvers only ever hand ``project_local`` the support slice of a vector.
"""

import abc
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import InvalidBlockError, InvalidInputError, ProjectionConvergenceError
from core.models import BasePolytopePoint
from core.set_functions import (
    CutOracle, ModularOracle, SubmodularOracle, SupportOracle,
    as_finite_vector, edmonds_greedy, in_base_polytope, MAX_EXHAUSTIVE_CHECK_SIZE,
)

logger = logging.getLogger(__name__)

DEFAULT_GENERIC_TOL = 1e-8


class Block(abc.ABC):
    """Abstract base class for decomposition blocks."""

    def __init__(self, n: int, support: Sequence[int], name: str):
        self.n = int(n)
        self.support = np.asarray(support, dtype=int)
        self.name = name
        if self.support.size and (self.support.min() < 0 or self.support.max() >= self.n):
            raise InvalidBlockError(f"Block {name}: support out of range for n={n}")
        if np.unique(self.support).size != self.support.size:
            raise InvalidBlockError(f"Block {name}: support has repeated elements")

    @property
    @abc.abstractmethod
    def local_oracle(self) -> SubmodularOracle:
        """F_i on the support elements, indexed 0..len(support)-1."""

    @abc.abstractmethod
    def project_local(self, a_local: np.ndarray) -> np.ndarray:
        """Euclidean projection of a support vector onto B(F_i)."""

    @abc.abstractmethod
    def lovasz_local(self, x_local: np.ndarray) -> float:
        """f_i(x) from the support slice of x."""

    @abc.abstractmethod
    def contains_local(self, y_local: np.ndarray, tol: float = 1e-9) -> bool:
        """Membership of a support vector in B(F_i)."""

    @property
    def oracle(self) -> SubmodularOracle:
        return SupportOracle(self.local_oracle, self.support, self.n)

    @property
    def zero_feasible(self) -> bool:
        return False

    def initial_local(self) -> np.ndarray:
        """0 when 0 lies in B(F_i), otherwise the greedy vertex at x = 0."""
        if self.zero_feasible:
            return np.zeros(self.support.size)
        return self.vertex_local(np.zeros(self.support.size))

    def vertex_local(self, direction_local: np.ndarray) -> np.ndarray:
        return edmonds_greedy(self.local_oracle, direction_local, source=self.name)[0].w

    def to_dense(self, y_local: np.ndarray) -> np.ndarray:
        dense = np.zeros(self.n)
        dense[self.support] = y_local
        return dense

    def project(self, a: Sequence[float]) -> BasePolytopePoint:
        a_arr = as_finite_vector(a, self.n, "a")
        return BasePolytopePoint(w=self.to_dense(self.project_local(a_arr[self.support])), source=self.name)

    def prox(self, a: Sequence[float]) -> BasePolytopePoint:
        """argmin over y in B(F_i) of <y, a> + ||y||^2, i.e. the projection of -a/2."""
        a_arr = as_finite_vector(a, self.n, "a")
        return self.project(-a_arr / 2.0)

    def contains(self, y: Sequence[float], tol: float = 1e-9) -> bool:
        y_arr = as_finite_vector(y, self.n, "y")
        off_support = np.ones(self.n, dtype=bool)
        off_support[self.support] = False
        if np.any(np.abs(y_arr[off_support]) > tol):
            return False
        return self.contains_local(y_arr[self.support], tol)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, support={self.support.size})"


class MatchingCutBlock(Block):
    """Cut function of vertex-disjoint weighted edges; B(F) is a product of segments."""

    def __init__(self, n: int, edges: Sequence[Tuple[int, int, float]], name: str = "matching"):
        edge_arr = np.asarray(edges, dtype=float).reshape(-1, 3)
        us = edge_arr[:, 0].astype(int)
        vs = edge_arr[:, 1].astype(int)
        weights = edge_arr[:, 2]
        if np.any(us == vs):
            raise InvalidBlockError(f"Block {name}: self-loop edge")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidBlockError(f"Block {name}: edge weights must be finite and nonnegative")
        if us.size == 0:
            raise InvalidBlockError(f"Block {name}: a matching needs at least one edge")
        endpoints = np.concatenate((us, vs))
        if np.unique(endpoints).size != endpoints.size:
            raise InvalidBlockError(f"Block {name}: edges share an endpoint, not a matching")
        support = np.sort(endpoints)
        super().__init__(n, support, name)
        self.us, self.vs, self.weights = us, vs, weights
        self._pu = np.searchsorted(support, us)
        self._pv = np.searchsorted(support, vs)
        self._local = CutOracle(support.size, list(zip(self._pu, self._pv, weights)))

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        return [(int(u), int(v), float(w)) for u, v, w in zip(self.us, self.vs, self.weights)]

    @property
    def local_oracle(self) -> SubmodularOracle:
        return self._local

    @property
    def zero_feasible(self) -> bool:
        return True

    def project_local(self, a_local: np.ndarray) -> np.ndarray:
        t = np.clip((a_local[self._pu] - a_local[self._pv]) / 2.0, -self.weights, self.weights)
        y = np.zeros(self.support.size)
        y[self._pu] = t
        y[self._pv] = -t
        return y

    def lovasz_local(self, x_local: np.ndarray) -> float:
        return float(self.weights @ np.abs(x_local[self._pu] - x_local[self._pv]))

    def contains_local(self, y_local: np.ndarray, tol: float = 1e-9) -> bool:
        t = y_local[self._pu]
        scale = np.maximum(self.weights, 1.0)
        return bool(np.all(np.abs(t + y_local[self._pv]) <= tol * scale)
                    and np.all(np.abs(t) <= self.weights + tol * scale))


class EdgeCutBlock(MatchingCutBlock):
    """Cut of a single edge (u, v): B(F) is the segment t(e_u - e_v), |t| <= weight."""

    def __init__(self, n: int, u: int, v: int, weight: float, name: Optional[str] = None):
        super().__init__(n, [(u, v, weight)], name=name or f"edge({u},{v})")
        self.u, self.v, self.weight = int(u), int(v), float(weight)


class ModularBlock(Block):
    """Modular function w(A); B(F) = {w}."""

    def __init__(self, w: Sequence[float], name: str = "modular"):
        w_arr = np.asarray(w, dtype=float)
        if w_arr.ndim != 1 or w_arr.size < 1:
            raise InvalidBlockError(f"Block {name}: w must be a nonempty vector")
        if not np.all(np.isfinite(w_arr)):
            raise InvalidBlockError(f"Block {name}: w must be finite")
        super().__init__(w_arr.size, np.arange(w_arr.size), name)
        self.w = w_arr
        self._local = ModularOracle(w_arr)

    @property
    def local_oracle(self) -> SubmodularOracle:
        return self._local

    @property
    def oracle(self) -> SubmodularOracle:
        return self._local

    @property
    def zero_feasible(self) -> bool:
        return not np.any(self.w)

    def initial_local(self) -> np.ndarray:
        return self.w.copy()

    def project_local(self, a_local: np.ndarray) -> np.ndarray:
        return self.w.copy()

    def lovasz_local(self, x_local: np.ndarray) -> float:
        return float(self.w @ x_local)

    def contains_local(self, y_local: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(y_local - self.w) <= tol * np.maximum(np.abs(self.w), 1.0)))


class GenericBlock(Block):
    """Any normalized submodular oracle, projected by conditional gradient with away steps.

    Linear subproblems over B(F) are solved by the greedy algorithm. After each
    Frank-Wolfe or away step the active set is re-optimized over its affine hull
    (with the usual ratio test back into the convex hull), which lets the
    Frank-Wolfe gap reach roundoff level in finitely many vertex additions.
    """

    def __init__(self, oracle: SubmodularOracle, n: Optional[int] = None, support: Optional[Sequence[int]] = None,
                 tol: float = DEFAULT_GENERIC_TOL, max_iter: Optional[int] = None, name: str = "generic"):
        if tol <= 0:
            raise InvalidBlockError(f"Block {name}: tol must be positive")
        support_arr = np.arange(oracle.n) if support is None else np.asarray(support, dtype=int)
        ground = oracle.n if n is None else n
        super().__init__(ground, support_arr, name)
        if self.support.size != oracle.n:
            raise InvalidBlockError(f"Block {name}: support size {self.support.size} != oracle n={oracle.n}")
        self._local = oracle
        self.tol = float(tol)
        self.max_iter = int(max_iter) if max_iter is not None else int(np.ceil(10 * oracle.n / tol))

    @property
    def local_oracle(self) -> SubmodularOracle:
        return self._local

    def project_local(self, a_local: np.ndarray) -> np.ndarray:
        return conditional_gradient_projection(self._local, a_local, self.tol, self.max_iter)

    def lovasz_local(self, x_local: np.ndarray) -> float:
        return edmonds_greedy(self._local, x_local)[1]

    def contains_local(self, y_local: np.ndarray, tol: float = 1e-9) -> bool:
        if self._local.n <= MAX_EXHAUSTIVE_CHECK_SIZE:
            return in_base_polytope(self._local, y_local, tol)
        # beyond exhaustive range: w(V) = F(V), and the most violated chain from greedy
        full = self._local.evaluate(frozenset(range(self._local.n)))
        if abs(float(np.sum(y_local)) - full) > tol * max(1.0, abs(full)):
            return False
        order = np.argsort(-y_local, kind="mergesort")
        prefix = self._local.prefix_values(order)
        return bool(np.all(np.cumsum(y_local[order]) <= prefix[1:] + tol * np.maximum(np.abs(prefix[1:]), 1.0)))


def _affine_minimizer(points: np.ndarray) -> np.ndarray:
    """Barycentric weights of the min-norm point in the affine hull of the rows."""
    m = points.shape[0]
    system = np.zeros((m + 1, m + 1))
    system[0, 1:] = 1.0
    system[1:, 0] = 1.0
    system[1:, 1:] = points @ points.T
    rhs = np.zeros(m + 1)
    rhs[0] = 1.0
    solution = np.linalg.lstsq(system, rhs, rcond=None)[0]
    return solution[1:]


def _corrective_pass(active: np.ndarray, weights: np.ndarray, a: np.ndarray,
                     drop_tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Minimize ||y - a|| over conv(active) starting from the given weights."""
    shifted = active - a
    for _ in range(active.shape[0] + 1):
        target = _affine_minimizer(shifted)
        if np.all(target >= -drop_tol):
            target = np.maximum(target, 0.0)
            return active, target / target.sum()
        decreasing = weights - target > drop_tol
        step = np.min(weights[decreasing] / (weights - target)[decreasing])
        weights = (1.0 - step) * weights + step * target
        keep = weights > drop_tol
        active, shifted, weights = active[keep], shifted[keep], weights[keep]
        weights = weights / weights.sum()
    return active, weights


def _vertex_index(active: np.ndarray, vertex: np.ndarray, tol: float = 1e-12) -> int:
    hits = np.flatnonzero(np.all(np.abs(active - vertex) <= tol * (1.0 + np.abs(vertex)), axis=1))
    return int(hits[0]) if hits.size else -1


def conditional_gradient_projection(oracle: SubmodularOracle, a: np.ndarray, tol: float = DEFAULT_GENERIC_TOL,
                                    max_iter: int = 100_000) -> np.ndarray:
    """Projection of a onto B(F) by away-step conditional gradient with corrective passes."""
    a = np.asarray(a, dtype=float)
    active = edmonds_greedy(oracle, a)[0].w[None, :]
    weights = np.ones(1)
    y = active[0].copy()
    scale = max(1.0, float(a @ a), float(y @ y))
    stop_gap = max(tol * tol, 1e-14 * scale)
    best_y, best_gap = y.copy(), np.inf

    for iteration in range(max_iter):
        grad = y - a
        fw_vertex = edmonds_greedy(oracle, -grad)[0].w
        fw_gap = float(grad @ (y - fw_vertex))
        if fw_gap < best_gap:
            best_y, best_gap = y.copy(), fw_gap
        if fw_gap <= stop_gap:
            logger.debug(f"Generic projection converged in {iteration} iterations, gap {fw_gap:.3e}")
            return y

        away_idx = int(np.argmax(active @ grad))
        away_dir = y - active[away_idx]
        away_step = fw_gap < float(grad @ away_dir) and weights[away_idx] < 1.0
        if away_step:
            lam = weights[away_idx]
            direction, max_step = away_dir, lam / (1.0 - lam)
        else:
            direction, max_step = fw_vertex - y, 1.0
        denom = float(direction @ direction)
        step = min(max_step, max(0.0, -float(grad @ direction) / denom)) if denom > 0 else 0.0

        if away_step:
            weights = weights * (1.0 + step)
            weights[away_idx] -= step
        else:
            weights = weights * (1.0 - step)
            idx = _vertex_index(active, fw_vertex)
            if idx < 0:
                active = np.vstack((active, fw_vertex))
                weights = np.append(weights, step)
            else:
                weights[idx] += step
        keep = weights > 1e-14
        active, weights = active[keep], weights[keep] / weights[keep].sum()

        idx = _vertex_index(active, fw_vertex)
        if idx < 0:
            active = np.vstack((active, fw_vertex))
            weights = np.append(weights, 0.0)
        active, weights = _corrective_pass(active, weights, a)
        y = weights @ active

    raise ProjectionConvergenceError(
        f"Generic projection did not reach gap {stop_gap:.3e} within {max_iter} iterations (best {best_gap:.3e})",
        best_iterate=best_y, gap=best_gap)


def project_edge(block: EdgeCutBlock, a: Sequence[float]) -> BasePolytopePoint:
    return block.project(a)


def project_matching(block: MatchingCutBlock, a: Sequence[float]) -> BasePolytopePoint:
    return block.project(a)


def project_modular(block: ModularBlock, a: Sequence[float]) -> BasePolytopePoint:
    return BasePolytopePoint(w=block.w.copy(), source=block.name)


def project_generic(block: GenericBlock, a: Sequence[float]) -> BasePolytopePoint:
    return block.project(a)


def prox_block(block: Block, a: Sequence[float]) -> BasePolytopePoint:
    if not np.all(np.isfinite(np.asarray(a, dtype=float))):
        raise InvalidInputError("a must be finite")
    return block.prox(a)
