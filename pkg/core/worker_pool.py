import asyncio
import json
import logging
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional

log = logging.getLogger(__name__)


class RuntimeStats:
    """Tracks task counts and wall time per label across a run"""

    def __init__(self):
        self.started = datetime.now()
        self.tasks: Dict[str, Dict[str, float]] = {}

    def record(self, label: str, seconds: float, count: int = 1):
        entry = self.tasks.setdefault(label, {"calls": 0, "items": 0, "seconds": 0.0})
        entry["calls"] += 1
        entry["items"] += count
        entry["seconds"] += seconds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "started": self.started.isoformat(),
            "finished": datetime.now().isoformat(),
            "tasks": {k: dict(v) for k, v in sorted(self.tasks.items())},
        }

    def save(self, path: Path):
        """Write runtime.json; kept apart from the reproducible artifacts."""
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self.to_dict(), f, indent=2)
        except OSError as e:
            log.warning("could not save runtime stats: %s", e)

    def print_summary(self):
        print(f"\n⏱️  RUNTIME SUMMARY")
        print(f"{'=' * 50}")
        for label, entry in sorted(self.tasks.items()):
            print(f"  {label}: {int(entry['items'])} items in {entry['seconds']:.2f}s")
        print(f"{'=' * 50}\n")


class WorkerPool:
    """Runs independent CPU tasks on threads under a semaphore.

    Results always come back in submission order, so any reduction over
    them is independent of the worker count.
    """

    def __init__(self, workers: int = 1, stats: Optional[RuntimeStats] = None):
        if workers < 1:
            raise ValueError("worker count must be at least 1")
        self.workers = workers
        self.stats = stats or RuntimeStats()
        self.active_tasks = 0

    async def _execute(self, semaphore: asyncio.Semaphore, fn: Callable, item: Any):
        async with semaphore:
            self.active_tasks += 1
            try:
                return await asyncio.to_thread(fn, item)
            finally:
                self.active_tasks -= 1

    async def _gather(self, fn: Callable, items: List[Any]) -> List[Any]:
        semaphore = asyncio.Semaphore(self.workers)
        return await asyncio.gather(*(self._execute(semaphore, fn, it) for it in items))

    def map(self, fn: Callable[[Any], Any], items: Iterable[Any], label: str = "task") -> List[Any]:
        items = list(items)
        start = time.perf_counter()
        if self.workers == 1 or len(items) <= 1:
            results = [fn(it) for it in items]
        else:
            results = asyncio.run(self._gather(fn, items))
        self.stats.record(label, time.perf_counter() - start, len(items))
        log.debug("%s: %d items on %d workers", label, len(items), self.workers)
        return results


def chunked(n: int, size: int) -> List[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]
