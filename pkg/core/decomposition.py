#! /usr/bin/env python
# -*- coding: utf-8 -*-

import logging
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from core.blocks import Block
from core.exceptions import InvalidInputError
from core.models import GroundSet
from core.set_functions import SubmodularOracle, SumOracle

logger = logging.getLogger(__name__)

SUM_DRIFT_TOL = 1e-7


class Decomposition:
    """F = sum of r simple blocks on a common ground set. Immutable once built."""

    def __init__(self, n: int, blocks: Sequence[Block], name: str = "decomposition"):
        self.ground = GroundSet(n)
        if not blocks:
            raise InvalidInputError("A decomposition needs at least one block")
        for block in blocks:
            if block.n != n:
                raise InvalidInputError(f"Block {block.name} lives on n={block.n}, decomposition on n={n}")
        self.blocks = tuple(blocks)
        self.name = name

    @property
    def n(self) -> int:
        return self.ground.n

    @property
    def r(self) -> int:
        return len(self.blocks)

    @cached_property
    def oracle(self) -> SubmodularOracle:
        return SumOracle([block.oracle for block in self.blocks])

    def evaluate(self, subset: Iterable[int]) -> float:
        return self.oracle(subset)

    def __repr__(self) -> str:
        return f"Decomposition(name={self.name!r}, n={self.n}, r={self.r})"


class DualIterate:
    """A point y = (y_1, ..., y_r) of the product of base polytopes.

    Blocks are stored over their supports. ``total`` caches the dense block sum,
    kept incrementally in O(support) per update and rebuilt from scratch every
    n * r updates so that accumulated roundoff stays bounded.
    """

    def __init__(self, decomposition: Decomposition, blocks: Sequence[np.ndarray]):
        if len(blocks) != decomposition.r:
            raise InvalidInputError(f"Expected {decomposition.r} blocks, got {len(blocks)}")
        self.decomposition = decomposition
        self.blocks: List[np.ndarray] = []
        for block, values in zip(decomposition.blocks, blocks):
            values = np.array(values, dtype=float)
            if values.shape != block.support.shape:
                raise InvalidInputError(f"Block {block.name}: expected {block.support.shape}, got {values.shape}")
            self.blocks.append(values)
        self.total = np.zeros(decomposition.n)
        self._updates_since_refresh = 0
        self.refresh_sum()

    @classmethod
    def initial(cls, decomposition: Decomposition) -> "DualIterate":
        return cls(decomposition, [block.initial_local() for block in decomposition.blocks])

    @classmethod
    def from_dense(cls, decomposition: Decomposition, dense: np.ndarray) -> "DualIterate":
        dense = np.asarray(dense, dtype=float)
        if dense.shape != (decomposition.r, decomposition.n):
            raise InvalidInputError(f"Expected shape ({decomposition.r}, {decomposition.n}), got {dense.shape}")
        return cls(decomposition, [dense[i, block.support] for i, block in enumerate(decomposition.blocks)])

    def refresh_sum(self) -> None:
        total = np.zeros(self.decomposition.n)
        for block, values in zip(self.decomposition.blocks, self.blocks):
            total[block.support] += values
        self.total = total
        self._updates_since_refresh = 0

    def update_block(self, i: int, values: np.ndarray) -> None:
        block = self.decomposition.blocks[i]
        self.total[block.support] += values - self.blocks[i]
        self.blocks[i] = values
        self._updates_since_refresh += 1
        if self._updates_since_refresh >= self.decomposition.n * self.decomposition.r:
            self.refresh_sum()

    def g(self) -> float:
        """||sum_i y_i||^2."""
        return float(self.total @ self.total)

    def block_gradient(self, i: int) -> np.ndarray:
        return 2.0 * self.total[self.decomposition.blocks[i].support]

    def primal(self) -> np.ndarray:
        """x = -sum_i y_i."""
        return -self.total

    def dense(self) -> np.ndarray:
        out = np.zeros((self.decomposition.r, self.decomposition.n))
        for i, (block, values) in enumerate(zip(self.decomposition.blocks, self.blocks)):
            out[i, block.support] = values
        return out

    def copy(self) -> "DualIterate":
        return DualIterate(self.decomposition, self.blocks)

    def sum_drift(self) -> float:
        exact = np.zeros(self.decomposition.n)
        for block, values in zip(self.decomposition.blocks, self.blocks):
            exact[block.support] += values
        return float(np.max(np.abs(exact - self.total), initial=0.0))

    def is_feasible(self, tol: float = 1e-9) -> bool:
        return all(block.contains_local(values, tol) for block, values in zip(self.decomposition.blocks, self.blocks))

    def distance(self, other: "DualIterate") -> float:
        return float(np.sqrt(sum(np.sum((a - b) ** 2) for a, b in zip(self.blocks, other.blocks))))


def project_zero_sum(y: Union[DualIterate, np.ndarray], r: Optional[int] = None) -> np.ndarray:
    """Projection onto {a : sum_i a_i = 0}: subtract the block mean from every block.

    Output blocks are dense (r, n); this is the full-dimensional operation that
    the coordinate methods avoid.
    """
    dense = y.dense() if isinstance(y, DualIterate) else np.asarray(y, dtype=float)
    if dense.ndim != 2 or (r is not None and dense.shape[0] != r):
        raise InvalidInputError(f"Expected a block matrix with {r or 'r'} rows, got shape {dense.shape}")
    return dense - dense.mean(axis=0, keepdims=True)


def project_product(decomposition: Decomposition, a: np.ndarray) -> DualIterate:
    """Blockwise projection of a dense (r, n) point onto the product of base polytopes."""
    a = np.asarray(a, dtype=float)
    if a.shape != (decomposition.r, decomposition.n):
        raise InvalidInputError(f"Expected shape ({decomposition.r}, {decomposition.n}), got {a.shape}")
    return DualIterate(decomposition, [block.project_local(a[i, block.support])
                                       for i, block in enumerate(decomposition.blocks)])


def random_feasible_point(decomposition: Decomposition, rng: np.random.Generator,
                          max_vertices: int = 3) -> DualIterate:
    """Convex combinations of greedy vertices for random directions, block by block."""
    blocks = []
    for block in decomposition.blocks:
        count = int(rng.integers(1, max_vertices + 1))
        weights = rng.dirichlet(np.ones(count))
        vertices = [block.vertex_local(rng.standard_normal(block.support.size)) for _ in range(count)]
        blocks.append(np.asarray(weights @ np.array(vertices)))
    return DualIterate(decomposition, blocks)
