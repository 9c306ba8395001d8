#! /usr/bin/env python
# -*- coding: utf-8 -*-

import logging
from typing import Dict, Optional, Sequence

import pandas as pd

from core.models import GapTrace

logger = logging.getLogger(__name__)

GAP_THRESHOLDS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def projections_to_reach(trace: GapTrace, threshold: float) -> Optional[int]:
    """First recorded projection count with nu_s <= threshold * nu_s(y_0)."""
    if not trace.records:
        return None
    level = threshold * trace.records[0].nu_s
    for record in trace.records:
        if record.nu_s <= level:
            return record.projections
    return None


class ConvergenceAnalyzer:
    """Projections-to-threshold table over the traces of one compare run."""

    def __init__(self, traces: Dict[str, GapTrace], thresholds: Sequence[float] = GAP_THRESHOLDS):
        self.traces = traces
        self.thresholds = tuple(thresholds)

    def summary(self) -> pd.DataFrame:
        rows = [{"solver": solver, "threshold": threshold, "projections": projections_to_reach(trace, threshold)}
                for solver, trace in self.traces.items() for threshold in self.thresholds]
        frame = pd.DataFrame(rows, columns=["solver", "threshold", "projections"])
        # unreached thresholds stay as empty cells
        frame["projections"] = frame["projections"].astype("Int64")
        return frame

    def log_summary(self, frame: Optional[pd.DataFrame] = None) -> None:
        frame = self.summary() if frame is None else frame
        for threshold, group in frame.groupby("threshold", sort=False):
            parts = [f"{row.solver}={'-' if pd.isna(row.projections) else int(row.projections)}"
                     for row in group.itertuples()]
            logger.info(f"projections to nu_s <= {threshold:g} * nu_s(y0): {', '.join(parts)}")

    def faster(self, first: str, second: str, threshold: float) -> bool:
        """True when `first` reaches the threshold in strictly fewer projections than `second`."""
        a = projections_to_reach(self.traces[first], threshold)
        b = projections_to_reach(self.traces[second], threshold)
        return a is not None and (b is None or a < b)
