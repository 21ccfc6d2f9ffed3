"""
Evaluation reports: canonical JSON, aligned text tables and CSV rows
"""

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar

from tabulate import tabulate

from ..error import DynoframeError, INTERNAL_ERROR
from ..workspace import canonical_json, schema_tag

T = TypeVar("T")
R = TypeVar("R")

# Applies ``func`` to each item and returns results in order (sequential or a worker pool).
ItemMapper = Callable[[Callable[[T], R], Sequence[T]], List[R]]

UNIT_RANGE = (0.0, 1.0)


def sequential_map(func: Callable[[T], R], items: Sequence[T]) -> List[R]:
    return [func(item) for item in items]


def mean_by_id(values: Mapping[str, float]) -> float:
    """Mean summed in item-id order, so it does not depend on input or worker order."""
    if not values:
        return 0.0
    return math.fsum(values[key] for key in sorted(values)) / len(values)


@dataclass
class EvalReport:
    """
    Metric values for one task and scenario.

    ``metrics`` values are floats, or None for a split with nothing to average
    (for example the rare HOI split of a catalog without rare classes).
    """

    task: str
    metrics: Dict[str, Optional[float]]
    scenario: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)
    items: List[Dict[str, Any]] = field(default_factory=list)
    ranges: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, value in self.metrics.items():
            if value is None:
                continue
            low, high = self.ranges.get(name, UNIT_RANGE)
            if not math.isfinite(value) or not low - 1e-12 <= value <= high + 1e-12:
                raise DynoframeError(
                    f"metric {name}={value} outside [{low}, {high}]",
                    status=INTERNAL_ERROR,
                    code="METRIC_RANGE",
                )

    def to_json(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "schema": schema_tag("report"),
            "task": self.task,
            "metrics": dict(self.metrics),
            "details": dict(self.details),
        }
        if self.scenario is not None:
            data["scenario"] = self.scenario
        return data

    def to_canonical_json(self) -> str:
        return canonical_json(self.to_json())

    def to_table(self) -> str:
        title = self.task if self.scenario is None else f"{self.task} ({self.scenario})"
        rows = [
            (name, "excluded" if value is None else value)
            for name, value in self.metrics.items()
        ]
        table = tabulate(rows, headers=["metric", title], tablefmt="pipe", floatfmt=".4f")
        return table + "\n"

    def to_csv(self) -> str:
        """Per-item (or per-class) rows with the union of their keys as columns."""
        buffer = io.StringIO()
        columns: List[str] = []
        for row in self.items:
            columns.extend(key for key in row if key not in columns)
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in self.items:
            writer.writerow(row)
        return buffer.getvalue()
