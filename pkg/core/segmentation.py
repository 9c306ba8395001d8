#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Image segmentation as decomposable submodular minimization.

An image becomes an 8-neighbor grid graph whose edge weights decay with color
distance. The edges are split into at most 8 matchings (4 directions times 2
parity classes), each a MatchingCutBlock, and a single modular block carries
the unary potentials. Minimizing the sum selects the foreground.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.blocks import MatchingCutBlock, ModularBlock
from core.decomposition import Decomposition
from core.exceptions import InvalidBlockError, InvalidInputError
from core.models import GridGraph, Image, SegmentationParameters

logger = logging.getLogger(__name__)

# (name, row offset, column offset); every undirected neighbor pair appears in exactly one direction
DIRECTIONS: Tuple[Tuple[str, int, int], ...] = (
    ("E", 0, 1),
    ("S", 1, 0),
    ("SE", 1, 1),
    ("SW", 1, -1),
)
MATCHING_SCHEME = "direction-parity-8"
LUMINANCE = np.array([0.299, 0.587, 0.114])


@dataclass
class SegmentationInstance:
    decomposition: Decomposition
    grid: GridGraph
    unary: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)
    image: Optional[Image] = None


def _direction_pairs(width: int, height: int, dr: int, dc: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Source/target pixel indices for one direction, with the source row and column."""
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    rows, cols = rows.ravel(), cols.ravel()
    valid = (rows + dr < height) & (cols + dc >= 0) & (cols + dc < width)
    rows, cols = rows[valid], cols[valid]
    sources = rows * width + cols
    targets = (rows + dr) * width + (cols + dc)
    return sources, targets, rows, cols


def build_grid(image: Image, lambda_: float = 1.0, sigma: float = 1.0,
               params: Optional[SegmentationParameters] = None) -> GridGraph:
    """weight(i, j) = lambda * exp(-sigma * ||v_i - v_j||^2 / normalization), diagonals scaled by 1/sqrt(2)."""
    if lambda_ <= 0 or sigma <= 0:
        raise InvalidInputError(f"lambda and sigma must be positive, got {lambda_}, {sigma}")
    params = params or SegmentationParameters(lambda_=lambda_, sigma=sigma)
    colors = image.pixels.astype(float)

    sources, targets, weights, directions = [], [], [], []
    for index, (name, dr, dc) in enumerate(DIRECTIONS):
        src, dst, _, _ = _direction_pairs(image.width, image.height, dr, dc)
        distance = np.sum((colors[src] - colors[dst]) ** 2, axis=1) / params.kernel_normalization
        w = lambda_ * np.exp(-sigma * distance)
        if dr and dc and params.diagonal_scaling:
            w = w / math.sqrt(2.0)
        sources.append(src)
        targets.append(dst)
        weights.append(w)
        directions.append(np.full(src.size, index))

    grid = GridGraph(width=image.width, height=image.height,
                     sources=np.concatenate(sources), targets=np.concatenate(targets),
                     weights=np.concatenate(weights), directions=np.concatenate(directions))
    logger.info(f"Built {image.width}x{image.height} grid with {grid.sources.size} edges "
                f"(lambda={lambda_}, sigma={sigma}, normalization={params.kernel_normalization:g})")
    return grid


def _parity(direction: str, row: np.ndarray, col: np.ndarray) -> np.ndarray:
    # consecutive edges of a direction differ in column parity (E) or row parity (S, SE, SW)
    return (col if direction == "E" else row) % 2


def partition_matchings(grid: GridGraph) -> List[MatchingCutBlock]:
    """Split the grid edges into direction/parity classes; empty classes are dropped."""
    blocks: List[MatchingCutBlock] = []
    covered = 0
    for index, (name, _, _) in enumerate(DIRECTIONS):
        in_direction = np.flatnonzero(grid.directions == index)
        src = grid.sources[in_direction]
        parity = _parity(name, src // grid.width, src % grid.width)
        for p in (0, 1):
            members = in_direction[parity == p]
            if members.size == 0:
                continue
            edges = list(zip(grid.sources[members], grid.targets[members], grid.weights[members]))
            # MatchingCutBlock rejects shared endpoints
            blocks.append(MatchingCutBlock(grid.n, edges, name=f"{name}/{p}"))
            covered += members.size
    if covered != grid.sources.size:
        raise InvalidBlockError(f"Matchings cover {covered} of {grid.sources.size} grid edges")
    logger.debug(f"Partitioned {grid.sources.size} edges into {len(blocks)} matchings")
    return blocks


def make_instance(grid: GridGraph, unary: Sequence[float], metadata: Optional[Dict[str, Any]] = None
                  ) -> SegmentationInstance:
    unary_arr = np.asarray(unary, dtype=float)
    if unary_arr.shape != (grid.n,):
        raise InvalidInputError(f"Unary has {unary_arr.size} entries for {grid.n} pixels")
    if not np.all(np.isfinite(unary_arr)):
        raise InvalidInputError("Unary potentials must be finite")
    blocks = partition_matchings(grid) + [ModularBlock(unary_arr, name="unary")]
    decomposition = Decomposition(grid.n, blocks, name=f"segmentation-{grid.width}x{grid.height}")
    info = {"scheme": MATCHING_SCHEME, "r": decomposition.r, "n": decomposition.n,
            "width": grid.width, "height": grid.height}
    info.update(metadata or {})
    return SegmentationInstance(decomposition=decomposition, grid=grid, unary=unary_arr, metadata=info)


def load_unary(path: Union[str, Path], n: int) -> np.ndarray:
    """One ASCII float per pixel, row-major, whitespace separated."""
    try:
        values = np.array(Path(path).read_text().split(), dtype=float)
    except ValueError as e:
        raise InvalidInputError(f"Unary file {path} is not a list of floats: {e}") from e
    if values.size != n:
        raise InvalidInputError(f"Unary file {path} has {values.size} values for {n} pixels")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError(f"Unary file {path} contains non-finite values")
    return values


def luminance(image: Image) -> np.ndarray:
    return image.pixels.astype(float) @ LUMINANCE


def seed_unary(image: Image, low: float = 64.0, high: float = 192.0, strength: float = 1.0) -> np.ndarray:
    """Dark pixels pay +strength to join the foreground, bright pixels -strength, the rest 0."""
    if low >= high:
        raise InvalidInputError(f"Seed thresholds must satisfy low < high, got {low} >= {high}")
    lum = luminance(image)
    unary = np.zeros(image.n)
    unary[lum <= low] = strength
    unary[lum >= high] = -strength
    return unary


def synthetic_image(width: int, height: int, rng: np.random.Generator,
                    background: float = 55.0, foreground: float = 200.0, noise: float = 20.0) -> Image:
    """Noisy two-tone image with a bright box covering the middle half."""
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    inside = ((rows >= height // 4) & (rows < height - height // 4)
              & (cols >= width // 4) & (cols < width - width // 4))
    base = np.where(inside, foreground, background).ravel()
    values = base[:, None] + noise * rng.standard_normal((width * height, 3))
    pixels = np.clip(np.rint(values), 0, 255).astype(np.uint8)
    return Image(width=width, height=height, pixels=pixels)


def instance_from_image(image: Image, params: SegmentationParameters, unary: Optional[np.ndarray] = None,
                        source: str = "") -> SegmentationInstance:
    grid = build_grid(image, params.lambda_, params.sigma, params)
    if unary is None:
        unary = seed_unary(image, params.seed_low, params.seed_high, params.unary_strength)
        unary_source = "seed-thresholds"
    else:
        unary_source = "file"
    metadata = {"image": source, "lambda": params.lambda_, "sigma": params.sigma,
                "kernel_normalization": params.kernel_normalization,
                "diagonal_scaling": params.diagonal_scaling, "unary": unary_source}
    instance = make_instance(grid, unary, metadata)
    instance.image = image
    return instance


def synthetic_segmentation(side: int, seed: int, params: SegmentationParameters,
                           rng: np.random.Generator) -> SegmentationInstance:
    image = synthetic_image(side, side, rng)
    instance = instance_from_image(image, params, source=f"synthetic-{side}x{side}")
    instance.metadata["seed"] = seed
    return instance


def cut_value(edges: Iterable[Tuple[int, int, float]], subset: Iterable[int]) -> float:
    """Total weight of edges with exactly one endpoint in subset."""
    chosen = set(int(v) for v in subset)
    return float(sum(w for u, v, w in edges if (int(u) in chosen) != (int(v) in chosen)))
