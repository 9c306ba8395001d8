#! /usr/bin/env python
# -*- coding: utf-8 -*-

import logging
import threading
from datetime import datetime
from typing import Optional

import psutil

from core.models import ResourceMetric
from core.trace_writer import TraceWriter

logger = logging.getLogger(__name__)


class RunResourceMonitor:
    """Samples CPU and resident memory of this process on a background thread while solvers run."""

    def __init__(self, trace_writer: TraceWriter, interval_seconds: float = 0.5, label: str = ""):
        self.trace_writer = trace_writer
        self.interval_seconds = interval_seconds
        self.label = label
        self.peak_rss_bytes = 0
        self.samples = 0

        self._process = psutil.Process()
        self._stop_event = threading.Event()
        self._monitor_thread: Optional[threading.Thread] = None

    def _collect_sample(self) -> Optional[ResourceMetric]:
        try:
            rss = self._process.memory_info().rss
            self.peak_rss_bytes = max(self.peak_rss_bytes, rss)
            return ResourceMetric(timestamp=datetime.now(), cpu_percent=self._process.cpu_percent(interval=None),
                                  rss_bytes=rss, label=self.label)
        except psutil.Error as e:
            logger.error(f"Error sampling process resources: {e}", exc_info=True)
            return None

    def _monitoring_loop(self) -> None:
        logger.debug(f"Resource monitoring loop started. Interval: {self.interval_seconds}s")
        # first cpu_percent call only primes the counter
        self._process.cpu_percent(interval=None)
        while not self._stop_event.is_set():
            sample = self._collect_sample()
            if sample:
                self.trace_writer.log_system_metric(sample)
                self.samples += 1
            self._stop_event.wait(self.interval_seconds)
        logger.debug("Resource monitoring loop stopped.")

    async def start_monitoring(self) -> None:
        if self._monitor_thread and self._monitor_thread.is_alive():
            logger.warning("Monitoring is already running.")
            return
        self._stop_event.clear()
        self._monitor_thread = threading.Thread(target=self._monitoring_loop, daemon=True)
        self._monitor_thread.start()

    async def stop_monitoring(self) -> None:
        if not (self._monitor_thread and self._monitor_thread.is_alive()):
            logger.debug("Monitoring not running or already stopped.")
            return
        self._stop_event.set()
        self._monitor_thread.join(timeout=10)
        if self._monitor_thread.is_alive():
            logger.warning("Monitoring thread did not stop in time.")
        # one last sample so short runs still report a peak
        final = self._collect_sample()
        if final:
            self.trace_writer.log_system_metric(final)
            self.samples += 1
        self._monitor_thread = None
        logger.info(f"Resource monitoring stopped after {self.samples} samples, "
                    f"peak RSS {self.peak_rss_bytes / 2 ** 20:.1f} MiB")
