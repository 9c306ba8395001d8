#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Synthetic and built-in decompositions.

Synthetic instances are r - 1 random matching cut blocks over random pairings
of the ground set plus one modular block with entries uniform in
[-modular_range, modular_range]; all draws come from ``make_rng(seed, "synthetic")``
so an instance is reproducible from its spec alone.
"""

import logging
from typing import Dict, List

import numpy as np

from core.blocks import EdgeCutBlock, MatchingCutBlock, ModularBlock
from core.decomposition import Decomposition
from core.exceptions import InvalidInputError
from core.models import SyntheticSpec
from utils.rng import make_rng

logger = logging.getLogger(__name__)

SYNTHETIC_KEYS = {"n": int, "r": int, "seed": int, "modular_range": float, "max_edge_weight": float}


def parse_synthetic_spec(text: str, default_seed: int = 0) -> SyntheticSpec:
    """Parse 'n=6,r=3,seed=1'; n and r are required, seed defaults to default_seed."""
    values: Dict[str, float] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or key not in SYNTHETIC_KEYS:
            raise InvalidInputError(f"Malformed synthetic field {item!r}; expected one of {sorted(SYNTHETIC_KEYS)}")
        if key in values:
            raise InvalidInputError(f"Synthetic field {key!r} given twice")
        try:
            values[key] = SYNTHETIC_KEYS[key](raw.strip())
        except ValueError as e:
            raise InvalidInputError(f"Synthetic field {key!r} has invalid value {raw!r}") from e
    if "n" not in values or "r" not in values:
        raise InvalidInputError(f"Synthetic spec {text!r} must give both n and r")
    values.setdefault("seed", default_seed)
    spec = SyntheticSpec(**values)
    validate_synthetic_spec(spec)
    return spec


def validate_synthetic_spec(spec: SyntheticSpec) -> None:
    if spec.n < 1 or spec.r < 1:
        raise InvalidInputError(f"Synthetic instances need n >= 1 and r >= 1, got n={spec.n}, r={spec.r}")
    if spec.r > 1 and spec.n < 2:
        raise InvalidInputError("Matching blocks need at least two elements")
    if spec.seed < 0:
        raise InvalidInputError(f"Seed must be nonnegative, got {spec.seed}")
    if spec.modular_range < 0 or spec.max_edge_weight < 0:
        raise InvalidInputError("modular_range and max_edge_weight must be nonnegative")


def random_matching(n: int, rng: np.random.Generator, max_weight: float, name: str) -> MatchingCutBlock:
    perm = rng.permutation(n)
    count = int(rng.integers(1, n // 2 + 1))
    weights = rng.uniform(0.0, max_weight, size=count)
    edges = [(int(perm[2 * k]), int(perm[2 * k + 1]), float(weights[k])) for k in range(count)]
    return MatchingCutBlock(n, edges, name=name)


def random_decomposition(spec: SyntheticSpec) -> Decomposition:
    validate_synthetic_spec(spec)
    rng = make_rng(spec.seed, "synthetic")
    blocks = [random_matching(spec.n, rng, spec.max_edge_weight, name=f"matching{i}") for i in range(spec.r - 1)]
    blocks.append(ModularBlock(rng.uniform(-spec.modular_range, spec.modular_range, size=spec.n), name="modular"))
    decomposition = Decomposition(spec.n, blocks, name=f"synthetic-n{spec.n}-r{spec.r}-seed{spec.seed}")
    logger.info(f"Generated {decomposition}")
    return decomposition


def two_edge_instance() -> Decomposition:
    """Two unit edge blocks on the same pair; the optimal set is a whole segment."""
    return Decomposition(2, [EdgeCutBlock(2, 0, 1, 1.0, name="edge0"), EdgeCutBlock(2, 0, 1, 1.0, name="edge1")],
                         name="two-unit-edges")


def edge_modular_instance() -> Decomposition:
    """n = 2, r = 2 with a unique proximal optimum y* = ((-0.55, 0.55), (0.3, -0.8))."""
    return Decomposition(2, [EdgeCutBlock(2, 0, 1, 1.0), ModularBlock([0.3, -0.8])], name="edge-modular")


def chain_instance() -> Decomposition:
    """Path 0-1-2 as two edge blocks plus a modular block; the block-to-sum map is injective."""
    blocks = [EdgeCutBlock(3, 0, 1, 1.0), EdgeCutBlock(3, 1, 2, 0.5), ModularBlock([0.9, -0.2, -1.1])]
    return Decomposition(3, blocks, name="chain")


def disjoint_edges_instance() -> Decomposition:
    """n = 4, r = 3: a two-edge matching, a single edge across it and a modular block."""
    blocks = [MatchingCutBlock(4, [(0, 1, 0.7), (2, 3, 1.2)], name="pairs"),
              EdgeCutBlock(4, 1, 2, 0.4),
              ModularBlock([0.5, -1.5, 0.8, -0.6])]
    return Decomposition(4, blocks, name="disjoint-edges")


def modular_only_instance(r: int = 3, n: int = 4) -> Decomposition:
    rng = make_rng(0, "modular-only")
    blocks = [ModularBlock(rng.uniform(-1.0, 1.0, size=n), name=f"modular{i}") for i in range(r)]
    return Decomposition(n, blocks, name=f"modular-only-r{r}")


def unique_optimum_instances() -> List[Decomposition]:
    return [edge_modular_instance(), chain_instance(), disjoint_edges_instance()]


def builtin_instances() -> List[Decomposition]:
    return unique_optimum_instances() + [two_edge_instance(), random_decomposition(SyntheticSpec(n=4, r=3, seed=11))]
