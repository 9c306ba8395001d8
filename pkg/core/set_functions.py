#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Set-function machinery on a ground set {0, ..., n-1}.

Oracles come in two styles. ``evaluate(subset)`` is the full-set style: one
call per subset. ``prefix_values(order)`` is the chain style used by the
greedy algorithm and by level-set sweeps: F of every prefix of an ordering.
The base class answers chain queries with n + 1 full-set calls; cut, modular
and sum oracles override it with O(n + m) marginal bookkeeping.
"""

import abc
import itertools
import logging
from typing import Callable, Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from core.exceptions import EnumerationLimitError, InvalidInputError
from core.models import BasePolytopePoint

logger = logging.getLogger(__name__)

MAX_ENUMERATION_SIZE = 25
MAX_EXHAUSTIVE_CHECK_SIZE = 12
REL_TOL = 1e-9
ABS_TOL = 1e-12

Subset = FrozenSet[int]


def close_enough(a: float, b: float, rel: float = REL_TOL, abs_floor: float = ABS_TOL) -> bool:
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_floor)


def mask_to_subset(mask: int, n: int) -> Subset:
    return frozenset(v for v in range(n) if (mask >> v) & 1)


def subset_to_mask(subset: Iterable[int]) -> int:
    mask = 0
    for v in subset:
        mask |= 1 << int(v)
    return mask


def as_finite_vector(x: Sequence[float], n: int, what: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise InvalidInputError(f"{what} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} must be finite")
    return arr


def descending_order(x: np.ndarray) -> np.ndarray:
    """Indices sorting x descending; ties by ascending element index."""
    return np.lexsort((np.arange(x.shape[0]), -x))


class SubmodularOracle(abc.ABC):
    """Black-box evaluator of a normalized set function."""

    def __init__(self, n: int):
        if int(n) != n or n < 1:
            raise InvalidInputError(f"Ground set size must be a positive integer, got {n!r}")
        self.n = int(n)

    @abc.abstractmethod
    def evaluate(self, subset: Subset) -> float:
        """F(subset) for a frozenset of element indices."""

    def __call__(self, subset: Iterable[int]) -> float:
        return self.evaluate(frozenset(int(v) for v in subset))

    def prefix_values(self, order: Sequence[int]) -> np.ndarray:
        """values[j] = F({order[0], ..., order[j-1]}) for j = 0..len(order)."""
        values = np.empty(len(order) + 1)
        values[0] = self.evaluate(frozenset())
        members = set()
        for j, v in enumerate(order):
            members.add(int(v))
            values[j + 1] = self.evaluate(frozenset(members))
        return values


class FunctionOracle(SubmodularOracle):
    """Wraps a plain callable on frozensets."""

    def __init__(self, n: int, fn: Callable[[Subset], float], name: str = "function"):
        super().__init__(n)
        self.fn = fn
        self.name = name

    def evaluate(self, subset: Subset) -> float:
        return float(self.fn(subset))

    def __repr__(self) -> str:
        return f"FunctionOracle(n={self.n}, name={self.name!r})"


class ModularOracle(SubmodularOracle):
    def __init__(self, w: Sequence[float]):
        w_arr = np.asarray(w, dtype=float)
        super().__init__(w_arr.shape[0])
        self.w = as_finite_vector(w_arr, self.n, "w")

    def evaluate(self, subset: Subset) -> float:
        if not subset:
            return 0.0
        return float(self.w[list(subset)].sum())

    def prefix_values(self, order: Sequence[int]) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.w[np.asarray(order, dtype=int)])))


class CutOracle(SubmodularOracle):
    """Weighted undirected cut function: sum of w_uv over edges with exactly one endpoint in A."""

    def __init__(self, n: int, edges: Sequence[Tuple[int, int, float]]):
        super().__init__(n)
        edge_arr = np.asarray(edges, dtype=float).reshape(-1, 3)
        self.us = edge_arr[:, 0].astype(int)
        self.vs = edge_arr[:, 1].astype(int)
        self.ws = edge_arr[:, 2]
        if edge_arr.size and (self.us.min() < 0 or self.vs.min() < 0 or max(self.us.max(), self.vs.max()) >= n):
            raise InvalidInputError(f"Edge endpoints out of range for n={n}")
        if np.any(self.ws < 0) or not np.all(np.isfinite(self.ws)):
            raise InvalidInputError("Cut weights must be finite and nonnegative")

    def evaluate(self, subset: Subset) -> float:
        inside = np.zeros(self.n, dtype=bool)
        if subset:
            inside[list(subset)] = True
        return float(self.ws[inside[self.us] != inside[self.vs]].sum())

    def prefix_values(self, order: Sequence[int]) -> np.ndarray:
        order = np.asarray(order, dtype=int)
        m = order.shape[0]
        position = np.full(self.n, m, dtype=int) # elements absent from order never enter
        position[order] = np.arange(m)
        first = np.minimum(position[self.us], position[self.vs])
        second = np.maximum(position[self.us], position[self.vs])
        # an edge is cut for prefix sizes j with first < j <= second
        diff = np.zeros(m + 2)
        np.add.at(diff, first + 1, self.ws)
        np.add.at(diff, second + 1, -self.ws)
        return np.cumsum(diff)[: m + 1]


class SumOracle(SubmodularOracle):
    def __init__(self, oracles: Sequence[SubmodularOracle]):
        if not oracles:
            raise InvalidInputError("SumOracle needs at least one term")
        super().__init__(oracles[0].n)
        if any(o.n != self.n for o in oracles):
            raise InvalidInputError("All summed oracles must share the ground set")
        self.oracles = list(oracles)

    def evaluate(self, subset: Subset) -> float:
        return float(sum(o.evaluate(subset) for o in self.oracles))

    def prefix_values(self, order: Sequence[int]) -> np.ndarray:
        total = np.zeros(len(order) + 1)
        for o in self.oracles:
            total += o.prefix_values(order)
        return total


class SupportOracle(SubmodularOracle):
    """Lifts an oracle on len(support) local elements to the ground set of size n."""

    def __init__(self, local: SubmodularOracle, support: np.ndarray, n: int):
        super().__init__(n)
        self.local = local
        self.support = np.asarray(support, dtype=int)
        if self.support.shape[0] != local.n:
            raise InvalidInputError(f"Support of size {self.support.shape[0]} does not match local oracle n={local.n}")
        self._local_index = np.full(n, -1, dtype=int)
        self._local_index[self.support] = np.arange(self.support.shape[0])

    def evaluate(self, subset: Subset) -> float:
        return self.local.evaluate(frozenset(int(self._local_index[v]) for v in subset if self._local_index[v] >= 0))

    def prefix_values(self, order: Sequence[int]) -> np.ndarray:
        order = np.asarray(order, dtype=int)
        local_positions = self._local_index[order]
        covered = local_positions >= 0
        local_values = self.local.prefix_values(local_positions[covered])
        # elements off the support leave F unchanged
        counts = np.concatenate(([0], np.cumsum(covered)))
        return local_values[counts]


class MemoizedOracle(SubmodularOracle):
    """Caches evaluations by bitmask; ground sets above MAX_ENUMERATION_SIZE are never cached."""

    def __init__(self, inner: SubmodularOracle):
        super().__init__(inner.n)
        self.inner = inner
        self.cacheable = inner.n <= MAX_ENUMERATION_SIZE
        self._cache: Dict[int, float] = {}
        if not self.cacheable:
            logger.warning(f"Oracle on n={inner.n} elements is too large to memoize; evaluations pass through.")

    def evaluate(self, subset: Subset) -> float:
        if not self.cacheable:
            return self.inner.evaluate(subset)
        key = subset_to_mask(subset)
        if key not in self._cache:
            self._cache[key] = self.inner.evaluate(subset)
        return self._cache[key]

    @property
    def cache_size(self) -> int:
        return len(self._cache)


def edmonds_greedy(F: SubmodularOracle, x: Sequence[float], source: str = "") -> Tuple[BasePolytopePoint, float]:
    """Vertex of B(F) maximizing <w, x>, and the Lovasz extension value f(x) = <w, x>."""
    x_arr = as_finite_vector(x, F.n)
    order = descending_order(x_arr)
    values = F.prefix_values(order)
    w = np.empty(F.n)
    w[order] = np.diff(values)
    return BasePolytopePoint(w=w, source=source), float(w @ x_arr)


def lovasz_extension(F: SubmodularOracle, x: Sequence[float]) -> float:
    return edmonds_greedy(F, x)[1]


def brute_force_min(F: SubmodularOracle) -> Tuple[Subset, float]:
    """Exhaustive minimum over all 2^n subsets; ties go to the smallest bitmask."""
    if F.n > MAX_ENUMERATION_SIZE:
        raise EnumerationLimitError(f"Refusing to enumerate 2^{F.n} subsets (limit n <= {MAX_ENUMERATION_SIZE})")
    best_mask, best_value = 0, F.evaluate(frozenset())
    for mask in range(1, 1 << F.n):
        value = F.evaluate(mask_to_subset(mask, F.n))
        if value < best_value:
            best_mask, best_value = mask, value
    return mask_to_subset(best_mask, F.n), float(best_value)


def recover_discrete(x: Sequence[float]) -> Subset:
    """Threshold at zero: {v : x(v) >= 0}."""
    x_arr = np.asarray(x, dtype=float)
    as_finite_vector(x_arr, x_arr.shape[0])
    return frozenset(int(v) for v in np.flatnonzero(x_arr >= 0))


def best_level_set(F: SubmodularOracle, x: Sequence[float]) -> Tuple[Subset, float]:
    """Minimum of F over the level sets {v : x(v) >= theta}; ties go to the smaller set."""
    x_arr = as_finite_vector(x, F.n)
    order = descending_order(x_arr)
    values = F.prefix_values(order)
    sorted_x = x_arr[order]
    # a prefix of size j is a level set iff it does not split a run of equal values
    boundaries = np.concatenate(([True], sorted_x[:-1] > sorted_x[1:], [True]))
    candidates = np.flatnonzero(boundaries)
    best = candidates[np.argmin(values[candidates])]
    return frozenset(int(v) for v in order[:best]), float(values[best])


def all_subset_values(F: SubmodularOracle) -> np.ndarray:
    """F on every bitmask 0..2^n - 1."""
    if F.n > MAX_ENUMERATION_SIZE:
        raise EnumerationLimitError(f"Refusing to enumerate 2^{F.n} subsets")
    return np.array([F.evaluate(mask_to_subset(mask, F.n)) for mask in range(1 << F.n)])


def _subset_indicator_matrix(n: int) -> np.ndarray:
    masks = np.arange(1 << n)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(float)


def is_submodular(F: SubmodularOracle, tol: float = 1e-9) -> bool:
    """Local exchange check F(A+i) + F(A+j) >= F(A) + F(A+i+j) over all A, i, j."""
    if F.n > MAX_EXHAUSTIVE_CHECK_SIZE:
        raise EnumerationLimitError(f"Exhaustive submodularity check limited to n <= {MAX_EXHAUSTIVE_CHECK_SIZE}")
    values = all_subset_values(F)
    if abs(values[0]) > tol:
        return False
    for mask in range(1 << F.n):
        outside = [v for v in range(F.n) if not (mask >> v) & 1]
        for i, j in itertools.combinations(outside, 2):
            lhs = values[mask | (1 << i)] + values[mask | (1 << j)]
            rhs = values[mask] + values[mask | (1 << i) | (1 << j)]
            if lhs < rhs - tol * max(1.0, abs(rhs)):
                return False
    return True


def in_base_polytope(F: SubmodularOracle, w: Sequence[float], tol: float = 1e-9) -> bool:
    """w(V) = F(V) and w(A) <= F(A) for all A, relative tolerance tol with floor ABS_TOL."""
    w_arr = as_finite_vector(w, F.n, "w")
    if F.n > MAX_EXHAUSTIVE_CHECK_SIZE:
        raise EnumerationLimitError(f"Exhaustive membership check limited to n <= {MAX_EXHAUSTIVE_CHECK_SIZE}")
    values = all_subset_values(F)
    sums = _subset_indicator_matrix(F.n) @ w_arr
    slack = np.maximum(tol * np.maximum(np.abs(values), np.abs(sums)), ABS_TOL)
    if abs(sums[-1] - values[-1]) > slack[-1]:
        return False
    return bool(np.all(sums <= values + slack))


def permutation_vertices(F: SubmodularOracle) -> np.ndarray:
    """All greedy vertices of B(F), one row per permutation (duplicates removed)."""
    if F.n > 8:
        raise EnumerationLimitError("Vertex enumeration is limited to n <= 8")
    rows: List[np.ndarray] = []
    for perm in itertools.permutations(range(F.n)):
        values = F.prefix_values(perm)
        w = np.empty(F.n)
        w[list(perm)] = np.diff(values)
        rows.append(w)
    return np.unique(np.round(np.array(rows), 12), axis=0)
