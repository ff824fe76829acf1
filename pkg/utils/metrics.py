"""
Per-epoch metrics records and wall-clock timing helpers
"""
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, asdict
from typing import Dict, Iterator, List, Optional

# Stable within a major version; never reorder
CSV_COLUMNS = ["epoch", "train_loss", "train_acc", "val_acc", "test_acc", "wall_seconds"]


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


@dataclass
class Metrics:
    """Metrics for one completed epoch"""

    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: Optional[float] = None
    test_accuracy: Optional[float] = None
    wall_seconds: Optional[float] = None

    def __post_init__(self):
        for name in ("train_accuracy", "val_accuracy", "test_accuracy"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self, include_wall_time: bool = True) -> List[str]:
        """Row matching CSV_COLUMNS"""
        return [
            str(self.epoch),
            _fmt(self.train_loss),
            _fmt(self.train_accuracy),
            _fmt(self.val_accuracy),
            _fmt(self.test_accuracy),
            _fmt(self.wall_seconds) if include_wall_time else "",
        ]


@dataclass
class Timings:
    """Accumulated wall-clock samples keyed by label"""

    samples: Dict[str, List[float]] = field(default_factory=dict)

    def record(self, label: str, seconds: float) -> None:
        self.samples.setdefault(label, []).append(seconds)

    def mean(self, label: str) -> float:
        values = self.samples.get(label, [])
        if not values:
            return 0.0
        return sum(values) / len(values)


@contextmanager
def stopwatch() -> Iterator[Dict[str, float]]:
    """Measure a block; the yielded dict gets 'seconds' on exit"""
    result = {"seconds": 0.0}
    start = time.perf_counter()
    try:
        yield result
    finally:
        result["seconds"] = time.perf_counter() - start

