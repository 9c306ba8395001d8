#! /usr/bin/env python
# -*- coding: utf-8 -*-

import json
import logging
import os
import threading
from dataclasses import asdict
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from core.image_io import emit_mask
from core.models import GapTrace, ResourceMetric, VerificationReport

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["projections", "nu_s", "nu_d", "g", "seconds"]
FLOAT_FORMAT = "%.17g"


class TraceWriter:
    """Owns a run output directory and every file written into it."""

    def __init__(self, output_dir: str = "results", deterministic: bool = True):
        self.output_dir = output_dir
        self.deterministic = deterministic
        self._setup_output_dir()

        self.system_log_path = os.path.join(self.output_dir, "system_metrics.jsonl")
        self.log_path = os.path.join(self.output_dir, "run.log")
        self._jsonl_lock = threading.Lock()

    def _setup_output_dir(self) -> None:
        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as e:
            logger.error(f"Error creating output directory {self.output_dir}: {e}", exc_info=True)
            raise

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _default_json_serializer(self, obj: Any) -> Any:
        if isinstance(obj, datetime):
            return obj.isoformat()
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return str(obj)

    def trace_frame(self, trace: GapTrace) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(record) for record in trace.records], columns=TRACE_COLUMNS)
        frame["projections"] = frame["projections"].astype(np.int64)
        if self.deterministic:
            frame["seconds"] = 0.0
        return frame

    def write_trace(self, trace: GapTrace, name: str = "trace.csv") -> str:
        path = self.path(name)
        self.trace_frame(trace).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        if trace.thetas:
            theta_path = self.path(f"thetas_{trace.solver}.csv")
            pd.DataFrame({"iteration": np.arange(len(trace.thetas)), "theta": trace.thetas}).to_csv(
                theta_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"Wrote {len(trace)} trace records to {path}")
        return path

    def write_solution(self, x: np.ndarray, name: str = "solution.txt") -> str:
        path = self.path(name)
        with open(path, "w") as f:
            f.writelines(f"{value:.17g}\n" for value in np.asarray(x, dtype=float))
        logger.info(f"Wrote primal solution of length {len(x)} to {path}")
        return path

    def write_mask(self, subset: Iterable[int], width: int, height: int, name: str = "mask.pgm") -> str:
        path = self.path(name)
        emit_mask(subset, width, height, path)
        return path

    def write_summary(self, summary: pd.DataFrame, name: str = "summary.csv") -> str:
        path = self.path(name)
        summary.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"Wrote {len(summary)} summary rows to {path}")
        return path

    def write_metadata(self, metadata: Dict[str, Any], name: str = "instance.json") -> str:
        path = self.path(name)
        with open(path, "w") as f:
            json.dump(metadata, f, indent=2, sort_keys=True, default=self._default_json_serializer)
            f.write("\n")
        return path

    def write_verification(self, reports: List[VerificationReport], name: str = "verification.txt") -> str:
        path = self.path(name)
        with open(path, "w") as f:
            f.writelines(report.to_line() + "\n" for report in reports)
        logger.info(f"Wrote {len(reports)} verification reports to {path}")
        return path

    def log_system_metric(self, sample: ResourceMetric) -> None:
        logger.debug(f"Process metric: CPU {sample.cpu_percent}%, RSS {sample.rss_bytes}")
        try:
            with self._jsonl_lock, open(self.system_log_path, "a") as f:
                json.dump(asdict(sample), f, default=self._default_json_serializer)
                f.write("\n")
        except OSError as e:
            logger.error(f"Error writing to {self.system_log_path}: {e}", exc_info=True)


def read_trace(path: str) -> Optional[pd.DataFrame]:
    try:
        return pd.read_csv(path)
    except FileNotFoundError:
        logger.info(f"Trace file {path} not found.")
        return None
