"""
Probe Service
"""

import logging
import os
from typing import Any, Dict, Optional

from ..config import ProbeConfig, request_setting
from ..metrics.report import EvalReport
from ..probe import (
    ProbeDataset,
    append_scatter_row,
    correlate,
    fit_probe,
    parse_split,
    probe_accuracy,
    read_scatter,
)
from ..workspace import DynoframeWorkspace

logger = logging.getLogger(__name__)

CORRELATION_RANGE = (-1.0, 1.0)


class ProbeService:
    """Service for linear probing of embeddings and the probe/task correlation."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def fit(self, probe_data: Dict[str, Any]) -> EvalReport:
        """
        Fit a linear verb probe and report its accuracy on every split.

        Args:
            probe_data: Request containing:
                - input: Embedding JSONL (``vector`` or ``block`` per record)
                - split: Train/val/test shares, e.g. ``70/10/20``
                - seed, learning_rate, epochs, l2, batch_size: Optimiser settings
                - scatter: Optional CSV to append (representation, probe_acc, task_metric) to
                - representation: Name of the embedding space (defaults to the file name)
                - task_metric: Downstream metric paired with this representation

        Returns:
            EvalReport with train, val and test accuracy (val is None when empty)
        """
        required_fields = ["input"]

        for field in required_fields:
            if field not in probe_data or not probe_data[field]:
                raise ValueError(f"{field} is required")

        seed = int(probe_data.get("seed") or 0)
        split = parse_split(probe_data.get("split") or "70/10/20")
        config = ProbeConfig(
            learning_rate=float(
                request_setting(probe_data, "learning_rate", ProbeConfig.learning_rate)
            ),
            epochs=int(request_setting(probe_data, "epochs", ProbeConfig.epochs)),
            l2=float(request_setting(probe_data, "l2", ProbeConfig.l2)),
            seed=seed,
            batch_size=probe_data.get("batch_size"),
        )
        records = self.workspace.read_jsonl(probe_data["input"], "embedding")
        ds = ProbeDataset.from_records(records, split, seed)
        result = fit_probe(ds, config)

        metrics: Dict[str, Optional[float]] = {}
        for name in ("train", "val", "test"):
            has_rows = len(ds.splits[name]) > 0
            accuracy = probe_accuracy(result.probe, ds, name) if has_rows else None
            metrics[f"{name}_accuracy"] = accuracy

        representation = probe_data.get("representation") or os.path.splitext(
            os.path.basename(probe_data["input"])
        )[0]
        scatter = probe_data.get("scatter")
        headline = metrics["test_accuracy"]
        if headline is None:
            headline = metrics["train_accuracy"]
        if scatter:
            task_metric = probe_data.get("task_metric")
            append_scatter_row(
                scatter,
                representation,
                float(headline or 0.0),
                None if task_metric is None else float(task_metric),
            )
            logger.info("appended %s to %s", representation, scatter)

        return EvalReport(
            task="probe",
            scenario=representation,
            metrics=metrics,
            details={
                "classes": ds.classes,
                "items": len(ds.y),
                "dim": ds.dim,
                "split": "/".join(str(s) for s in split),
                "split_sizes": {
                    name: int(len(ds.splits[name])) for name in ("train", "val", "test")
                },
                "seed": seed,
                "epochs": config.epochs,
                "final_loss": result.losses[-1] if result.losses else None,
            },
        )

    def correlate(self, correlate_data: Dict[str, Any]) -> EvalReport:
        """
        Correlate two numeric columns of a scatter CSV.

        Args:
            correlate_data: Request containing:
                - csv: Scatter CSV
                - x: Column name (default ``probe_acc``)
                - y: Column name (default ``task_metric``)

        Returns:
            EvalReport with pearson and spearman
        """
        required_fields = ["csv"]

        for field in required_fields:
            if field not in correlate_data or not correlate_data[field]:
                raise ValueError(f"{field} is required")

        x_column = correlate_data.get("x") or "probe_acc"
        y_column = correlate_data.get("y") or "task_metric"
        self.workspace.track(correlate_data["csv"])
        xs, ys = read_scatter(correlate_data["csv"], x_column, y_column)
        pearson, spearman = correlate(xs, ys)
        return EvalReport(
            task="correlate",
            metrics={"pearson": pearson, "spearman": spearman},
            details={"points": len(xs), "x": x_column, "y": y_column},
            ranges={"pearson": CORRELATION_RANGE, "spearman": CORRELATION_RANGE},
        )
