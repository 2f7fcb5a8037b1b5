"""Wall-clock and memory sampling for the training log."""

import time

import psutil


class PerformanceMonitor:
    """Reads the resident set size of the current process via psutil."""

    def __init__(self) -> None:
        try:
            self._process: psutil.Process | None = psutil.Process()
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            self._process = None

    def rss_mb(self) -> float:
        """Resident set size in MiB, or 0.0 when the process cannot be inspected."""
        if self._process is None:
            return 0.0
        try:
            return self._process.memory_info().rss / (1024 * 1024)
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            return 0.0


class Stopwatch:
    """Milliseconds since construction or the last ``lap``."""

    def __init__(self) -> None:
        self._start = time.perf_counter()

    def lap(self) -> float:
        now = time.perf_counter()
        elapsed_ms = (now - self._start) * 1000.0
        self._start = now
        return elapsed_ms
