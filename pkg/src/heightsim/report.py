"""JSON and CSV output of experiment results."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stats import TestResult

SCHEMA_VERSION = 1

__all__ = ["ExperimentReport", "SCHEMA_VERSION", "write_csv", "results_table"]


def _plain(obj):
    """JSON-safe copy: numpy scalars/arrays become Python values, inf/nan become strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_plain(v) for v in row])


RESULT_COLUMNS = ["name", "kind", "estimate", "target", "se", "stat_tol", "bias_tol",
                  "tolerance", "p_value", "n_effective", "passed"]


def results_table(results) -> tuple[list[str], list[list]]:
    rows = [[getattr(r, c) for c in RESULT_COLUMNS] for r in results]
    return RESULT_COLUMNS, rows


@dataclass
class ExperimentReport:
    config: dict
    seed: int
    results: list[TestResult]
    tables: dict = field(default_factory=dict)
    runtime: float = 0.0
    timestamp: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return _plain({
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "seed": self.seed,
            "all_passed": self.all_passed,
            "results": [r.to_dict() for r in self.results],
            "runtime_seconds": self.runtime,
            "timestamp": self.timestamp,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, out_dir) -> Path:
        """Write report.json, results.csv and one CSV per table into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json() + "\n")
        write_csv(out / "results.csv", *results_table(self.results))
        for name, (header, rows) in self.tables.items():
            write_csv(out / f"{name}.csv", header, rows)
        return out / "report.json"

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]
