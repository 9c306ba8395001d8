#! /usr/bin/env python
# -*- coding: utf-8 -*-

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional
from datetime import datetime

import numpy as np

from core.exceptions import InvalidInputError


class LogLevel(Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class SolverKind(Enum):
    RCDM = "rcdm"
    ACDM = "acdm"
    AP = "ap"


class VerifySuite(Enum):
    ESO = "eso"
    THEOREM1 = "theorem1"
    DUALITY = "duality"
    APPENDIXB = "appendixb"
    RATE = "rate"
    ALL = "all"


class ClaimStatus(Enum):
    PASSED = "passed"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class GroundSet:
    n: int # elements are labeled 0..n-1

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"Ground set size must be a positive integer, got {self.n!r}")


@dataclass
class BasePolytopePoint:
    w: np.ndarray
    source: str = "" # name of the block whose base polytope contains w


@dataclass
class SolverConfig:
    seed: int = 0
    max_projections: int = 100_000
    gap_tol: float = 1e-6 # stop once nu_s <= gap_tol
    trace_every: int = 100 # record cadence, in projections
    stop_on_discrete: bool = False
    discrete_tol: float = 1e-9 # nu_d at or below this counts as zero
    epoch_length: Optional[int] = None # ACDM override of ceil(4 n r^1.5) + 1
    record_theta: bool = False
    lipschitz: float = 2.0 # block Lipschitz constant used by the RCDM step

    def __post_init__(self) -> None:
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise InvalidInputError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.max_projections < 1:
            raise InvalidInputError(f"max_projections must be positive, got {self.max_projections}")
        if self.trace_every < 1:
            raise InvalidInputError(f"trace_every must be positive, got {self.trace_every}")
        if self.gap_tol < 0 or self.discrete_tol < 0:
            raise InvalidInputError("gap_tol and discrete_tol must be nonnegative")
        if self.epoch_length is not None and self.epoch_length < 1:
            raise InvalidInputError(f"epoch_length must be positive, got {self.epoch_length}")
        if self.lipschitz <= 0:
            raise InvalidInputError(f"lipschitz must be positive, got {self.lipschitz}")


@dataclass
class GapRecord:
    projections: int
    nu_s: float
    nu_d: float
    g: float
    seconds: float = 0.0


@dataclass
class GapTrace:
    solver: str = ""
    records: List[GapRecord] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    thetas: List[float] = field(default_factory=list)

    def append(self, record: GapRecord) -> None:
        if self.records and record.projections <= self.records[-1].projections:
            raise InvalidInputError(
                f"Trace projections must increase strictly: {record.projections} after {self.records[-1].projections}")
        self.records.append(record)

    @property
    def last(self) -> Optional[GapRecord]:
        return self.records[-1] if self.records else None

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class VerificationReport:
    claim_id: str
    status: ClaimStatus
    trials: int = 0
    violations: int = 0
    worst_margin: float = float("inf")
    tolerance: float = 0.0
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status is not ClaimStatus.FAILED

    def to_line(self) -> str:
        return (f"{self.claim_id} {self.status.value} {self.trials} {self.violations} "
                f"{self.worst_margin:.17g} {self.tolerance:.17g}")


@dataclass
class Image:
    width: int
    height: int
    pixels: np.ndarray # (height * width, 3) uint8, row-major

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(f"Image must be nonempty, got {self.width}x{self.height}")
        if self.pixels.shape != (self.width * self.height, 3):
            raise InvalidInputError(
                f"Pixel array shape {self.pixels.shape} does not match {self.width}x{self.height} RGB")

    @property
    def n(self) -> int:
        return self.width * self.height


@dataclass
class GridGraph:
    width: int
    height: int
    sources: np.ndarray # int, one entry per undirected edge
    targets: np.ndarray
    weights: np.ndarray
    directions: np.ndarray # index into segmentation.DIRECTIONS

    @property
    def n(self) -> int:
        return self.width * self.height

    @property
    def edges(self) -> List[tuple]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.sources, self.targets, self.weights)]


@dataclass
class SegmentationParameters:
    lambda_: float = 1.0 # edge-weight scale
    sigma: float = 1.0 # kernel bandwidth on normalized RGB distance
    kernel_normalization: float = 255.0 ** 2
    diagonal_scaling: bool = True # diagonal edges divided by sqrt(2)
    seed_low: float = 64.0 # luminance at or below: background seed
    seed_high: float = 192.0 # luminance at or above: foreground seed
    unary_strength: float = 1.0


@dataclass
class SyntheticSpec:
    n: int
    r: int
    seed: int = 0
    modular_range: float = 3.0
    max_edge_weight: float = 2.0


@dataclass
class RunParameters:
    output_directory: str = "results"
    log_level: LogLevel = LogLevel.INFO
    deterministic_trace: bool = True # write 0 in the seconds column
    monitor_resources: bool = True
    monitoring_interval_seconds: float = 0.5


@dataclass
class RunSpec:
    command: str
    solvers: List[SolverKind] = field(default_factory=list)
    synthetic: Optional[SyntheticSpec] = None
    synthetic_grid: Optional[int] = None # side length of a synthetic square image
    image_path: Optional[str] = None
    unary_path: Optional[str] = None
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    segmentation: SegmentationParameters = field(default_factory=SegmentationParameters)
    run: RunParameters = field(default_factory=RunParameters)
    verify_brute_force: bool = False

    def __post_init__(self) -> None:
        sources = [self.synthetic is not None, self.synthetic_grid is not None, self.image_path is not None]
        if self.command in ("solve", "compare") and sum(sources) != 1:
            raise InvalidInputError("Exactly one instance source is required: --image, --synthetic or --synthetic-grid")
        if self.unary_path is not None and self.image_path is None:
            raise InvalidInputError("--unary only applies to --image instances")


@dataclass
class FullConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    segmentation: SegmentationParameters = field(default_factory=SegmentationParameters)
    run: RunParameters = field(default_factory=RunParameters)


@dataclass
class ResourceMetric: # process level
    timestamp: datetime
    cpu_percent: Optional[float] = None
    rss_bytes: Optional[int] = None
    label: str = ""
