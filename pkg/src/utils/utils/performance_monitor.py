"""
Performance monitoring utilities
Tracks wall-clock cost of sampler blocks, factorizations and pipeline cells
"""
import time
import threading
from collections import deque
from contextlib import contextmanager
from typing import Any, Deque, Dict, Iterator, Optional

import numpy as np
from loguru import logger

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False


class PerformanceMonitor:
    """
    Collects per-operation timings in milliseconds
    """

    def __init__(self, max_history: int = 10000):
        """
        Initialize performance monitor

        Args:
            max_history: Maximum number of timings kept per operation
        """
        self.max_history = max_history
        self.timings: Dict[str, Deque[float]] = {}
        self.counts: Dict[str, int] = {}
        self.lock = threading.Lock()
        self.start_time = time.time()

    def record_latency(self, latency_ms: float, operation: str = "default"):
        """Record the duration of one operation"""
        with self.lock:
            if operation not in self.timings:
                self.timings[operation] = deque(maxlen=self.max_history)
                self.counts[operation] = 0
            self.timings[operation].append(latency_ms)
            self.counts[operation] += 1

    @contextmanager
    def timed(self, operation: str) -> Iterator[None]:
        """Context manager recording the wrapped block's duration"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record_latency((time.perf_counter() - start) * 1000.0, operation)

    def get_latency_stats(self, operation: str) -> Dict[str, float]:
        """Summary statistics for one operation"""
        with self.lock:
            data = np.asarray(self.timings.get(operation, ()), dtype=float)
            count = self.counts.get(operation, 0)

        if data.size == 0:
            return {"count": 0, "mean": 0.0, "p50": 0.0, "p95": 0.0, "max": 0.0, "total": 0.0}

        return {
            "count": count,
            "mean": float(data.mean()),
            "p50": float(np.percentile(data, 50)),
            "p95": float(np.percentile(data, 95)),
            "max": float(data.max()),
            "total": float(data.sum()),
        }

    def get_system_metrics(self) -> Dict[str, Any]:
        """Process-level metrics"""
        metrics: Dict[str, Any] = {"uptime_seconds": time.time() - self.start_time}

        if PSUTIL_AVAILABLE:
            try:
                process = psutil.Process()
                metrics["rss_mb"] = process.memory_info().rss / (1024 * 1024)
                metrics["memory_percent"] = psutil.virtual_memory().percent
            except Exception as e:
                # Log but don't fail if metrics collection fails
                logger.warning(f"Failed to collect system metrics: {e}")

        return metrics

    def get_all_metrics(self) -> Dict[str, Any]:
        """All operation stats plus system metrics"""
        with self.lock:
            operations = list(self.timings.keys())
        return {
            "system": self.get_system_metrics(),
            "operations": {op: self.get_latency_stats(op) for op in operations},
        }

    def log_summary(self, prefix: str = ""):
        """Write one debug line per operation"""
        for op, stats in self.get_all_metrics()["operations"].items():
            logger.debug(
                f"{prefix}{op}: n={stats['count']} mean={stats['mean']:.2f}ms "
                f"p95={stats['p95']:.2f}ms total={stats['total'] / 1000.0:.1f}s"
            )

    def reset(self):
        """Reset all metrics"""
        with self.lock:
            self.timings.clear()
            self.counts.clear()
            self.start_time = time.time()


# Global performance monitor instance
_global_monitor: Optional[PerformanceMonitor] = None


def get_performance_monitor() -> PerformanceMonitor:
    """Get or create global performance monitor instance"""
    global _global_monitor
    if _global_monitor is None:
        _global_monitor = PerformanceMonitor()
    return _global_monitor
