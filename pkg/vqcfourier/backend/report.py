"""
Result files for one experiment run.

Every run directory gets results.csv, results.jsonl, timings.csv and meta.txt.
Wall-clock times live only in timings.csv so the other files are identical
across reruns with the same config and seeds.
"""

import logging
import math
import platform
import threading
from dataclasses import asdict, dataclass, field
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd

from ..shared.utils import RNG_ALGORITHM, dumps, to_jsonable

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "experiment_id", "strategy", "D", "fraction", "train_mse", "test_mse",
    "test_accuracy", "seed", "diverged", "metadata",
]
TIMING_COLUMNS = ["experiment_id", "strategy", "D", "seed", "wall_time"]


@dataclass
class ResultRecord:
    experiment_id: str
    strategy: str
    D: int
    fraction: float
    train_mse: Optional[float]
    test_mse: Optional[float]
    test_accuracy: Optional[float] = None
    wall_time: float = 0.0
    seed: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)
    diverged: bool = False

    def __post_init__(self):
        for name in ("train_mse", "test_mse", "test_accuracy"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                self.diverged = True

    def to_dict(self, with_time: bool = True) -> Dict[str, Any]:
        out = to_jsonable(asdict(self))
        if not with_time:
            out.pop("wall_time")
        return out


@dataclass
class SelectionRecord:
    """Smallest sampled D whose error against the full model is below epsilon"""

    L: int
    d: int
    epsilon: float
    seed: int
    selected_D: int
    full_D: int
    fraction: float
    error: float

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(asdict(self))


def package_versions(names: Iterable[str] = ("vqcfourier", "numpy", "scipy", "scikit-learn", "pandas")) -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in names:
        try:
            versions[name] = importlib_metadata.version(name)
        except importlib_metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class ResultWriter:
    """Collects records from worker threads and writes them in one place"""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.records: List[ResultRecord] = []
        self.selections: List[SelectionRecord] = []
        self._lock = threading.Lock()

    def add(self, record: ResultRecord) -> None:
        with self._lock:
            self.records.append(record)

    def add_selection(self, record: SelectionRecord) -> None:
        with self._lock:
            self.selections.append(record)

    def write(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        rows = [r.to_dict(with_time=False) for r in self.records]
        frame = pd.DataFrame(rows, columns=RESULT_COLUMNS)
        frame["metadata"] = [dumps(r["metadata"]) for r in rows]
        frame.to_csv(self.out_dir / "results.csv", index=False)

        with open(self.out_dir / "results.jsonl", "w", encoding="utf-8") as f:
            for row in rows:
                f.write(dumps(row) + "\n")

        timings = pd.DataFrame([{k: getattr(r, k) for k in TIMING_COLUMNS} for r in self.records],
                               columns=TIMING_COLUMNS)
        timings.to_csv(self.out_dir / "timings.csv", index=False)

        if self.selections:
            pd.DataFrame([s.to_dict() for s in self.selections]).to_csv(self.out_dir / "selection.csv", index=False)
        logger.info("Wrote %d result records to %s", len(self.records), self.out_dir)
        return self.out_dir

    def write_meta(self, config: Dict[str, Any], seeds: Iterable[int],
                   summary: Optional[Dict[str, Any]] = None) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        lines = [f"rng={RNG_ALGORITHM}", f"seeds={dumps(list(seeds))}", f"config={dumps(config)}"]
        if summary is not None:
            lines.append(f"summary={dumps(summary)}")
        lines += [f"version.{name}={version}" for name, version in package_versions().items()]
        (self.out_dir / "meta.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
