import time
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, Iterator, List

import psutil


class ResourceMonitor:
    """Records wall time per command phase and the resident memory of the process."""

    def __init__(self):
        self.start_time = time.time()
        self.process = psutil.Process()
        self.phases: Dict[str, float] = {}
        self.metrics_history: List[Dict[str, Any]] = []
        self.peak_rss = 0
        self.sample()

    def sample(self) -> Dict[str, Any]:
        """Collect and store the current metrics."""
        memory = self.process.memory_info()
        self.peak_rss = max(self.peak_rss, memory.rss)
        metrics = {
            "timestamp": datetime.now().isoformat(),
            "elapsed_time": time.time() - self.start_time,
            "rss": memory.rss,
            "vms": memory.vms,
            "num_threads": self.process.num_threads(),
        }
        self.metrics_history.append(metrics)
        return metrics

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """Time a named phase; repeated phases accumulate."""
        started = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - started
            self.sample()

    def get_summary_stats(self) -> Dict[str, Any]:
        return {
            "total_time": time.time() - self.start_time,
            "phases": dict(self.phases),
            "peak_rss": self.peak_rss,
            "samples": len(self.metrics_history),
        }
