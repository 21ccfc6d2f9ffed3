"""
Linear probing of frozen embeddings and the probe-vs-task correlation analysis
"""

import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .config import ProbeConfig
from .error import DynoframeError, INTERNAL_ERROR
from .workspace import check_schema

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
SCATTER_COLUMNS = ("representation", "probe_acc", "task_metric")


def parse_split(text: str) -> Tuple[int, int, int]:
    """``"70/10/20"`` -> (70, 10, 20)"""
    parts = text.split("/")
    try:
        values = tuple(int(p) for p in parts)
    except ValueError:
        values = ()
    if len(values) != 3 or any(v < 0 for v in values) or sum(values) == 0 or values[0] == 0:
        raise ValueError(f"split must look like 70/10/20 with a non-zero train share, got {text!r}")
    return values  # type: ignore[return-value]


@dataclass
class ProbeDataset:
    """Vectors, integer labels and disjoint train/val/test index sets."""

    x: np.ndarray
    y: np.ndarray
    classes: List[str]
    splits: Dict[str, np.ndarray]
    ids: Optional[List[str]] = None

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.y.shape != (self.x.shape[0],):
            raise DynoframeError(
                f"need one label per vector, got X{self.x.shape} y{self.y.shape}",
                code="SHAPE_MISMATCH",
            )
        if not np.all(np.isfinite(self.x)):
            raise DynoframeError("embeddings contain non-finite values", code="NON_FINITE")
        seen: set = set()
        for name in SPLITS:
            members = set(int(i) for i in self.splits.get(name, ()))
            if seen & members:
                raise DynoframeError(f"split {name} overlaps another split", code="SPLIT_OVERLAP")
            seen |= members
        if len(self.classes) < 2:
            raise DynoframeError("probing needs at least two classes", code="SINGLE_CLASS")
        present = set(int(c) for c in self.y[self.splits["train"]])
        absent = [self.classes[c] for c in range(len(self.classes)) if c not in present]
        if absent:
            raise DynoframeError(f"class '{absent[0]}' has no training samples", code="EMPTY_CLASS")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    def part(self, split: str) -> Tuple[np.ndarray, np.ndarray]:
        index = self.splits[split]
        return self.x[index], self.y[index]

    @classmethod
    def from_arrays(
        cls,
        x: Any,
        labels: Sequence[Any],
        split: Tuple[int, int, int] = (70, 10, 20),
        seed: int = 0,
        ids: Optional[List[str]] = None,
    ) -> "ProbeDataset":
        """Map labels to sorted class ids and split a seeded permutation by the given shares."""
        x = np.asarray(x, dtype=np.float64)
        classes = sorted({str(label) for label in labels})
        lookup = {label: i for i, label in enumerate(classes)}
        y = np.array([lookup[str(label)] for label in labels], dtype=np.int64)

        n = len(y)
        order = np.random.default_rng(seed).permutation(n)
        total = sum(split)
        n_train = n * split[0] // total
        n_val = n * split[1] // total
        splits = {
            "train": np.sort(order[:n_train]),
            "val": np.sort(order[n_train : n_train + n_val]),
            "test": np.sort(order[n_train + n_val :]),
        }
        return cls(x, y, classes, splits, ids)

    @classmethod
    def from_records(
        cls,
        records: Sequence[Mapping[str, Any]],
        split: Tuple[int, int, int] = (70, 10, 20),
        seed: int = 0,
    ) -> "ProbeDataset":
        """
        Build a dataset from ``{id, label, vector}`` or ``{id, label, block}`` records.

        Unpooled ``block`` inputs (K x d) are mean-pooled over tokens.
        """
        if not records:
            raise DynoframeError("no embedding records", code="EMPTY_DATASET")
        vectors, labels, ids = [], [], []
        for position, record in enumerate(records):
            check_schema(dict(record), "embedding")
            if "label" not in record:
                raise DynoframeError(f"record {position}: 'label' is required", code="SCHEMA_ERROR")
            if "vector" in record:
                vector = np.asarray(record["vector"], dtype=np.float64)
            elif "block" in record:
                block = np.asarray(record["block"], dtype=np.float64)
                if block.ndim != 2 or block.shape[0] == 0:
                    raise DynoframeError(
                        f"record {position}: block must be a non-empty K x d array",
                        code="SCHEMA_ERROR",
                    )
                vector = block.mean(axis=0)
            else:
                raise DynoframeError(
                    f"record {position}: 'vector' or 'block' is required", code="SCHEMA_ERROR"
                )
            if vector.ndim != 1 or (vectors and vector.shape != vectors[0].shape):
                raise DynoframeError(
                    f"record {position}: embedding width differs from the first record",
                    code="SHAPE_MISMATCH",
                )
            vectors.append(vector)
            labels.append(record["label"])
            ids.append(str(record.get("id", position)))
        return cls.from_arrays(np.stack(vectors), labels, split, seed, ids)


@dataclass
class LinearProbe:
    weight: np.ndarray
    bias: np.ndarray

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax class; ties go to the lowest class id."""
        return np.argmax(self.logits(x), axis=1)


class ProbeResult(NamedTuple):
    probe: LinearProbe
    losses: List[float]


def probe_loss_and_grad(
    probe: LinearProbe, x: np.ndarray, y: np.ndarray, l2: float
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Mean cross-entropy plus ``l2/2 * ||W||^2`` (bias not penalised).

    Returns:
        (loss, grad wrt weight, grad wrt bias)
    """
    logits = probe.logits(x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = x.shape[0]
    loss = -float(log_probs[np.arange(n), y].mean()) + 0.5 * l2 * float(np.sum(probe.weight ** 2))

    delta = np.exp(log_probs)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = delta.T @ x + l2 * probe.weight
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def fit_probe(ds: ProbeDataset, config: Optional[ProbeConfig] = None) -> ProbeResult:
    """
    Fit multinomial logistic regression on the training split by gradient descent.

    Args:
        ds: Probe dataset
        config: Optimiser settings; full batch below 10,000 training rows

    Returns:
        ProbeResult with the probe and one mean training loss per epoch

    Raises:
        DynoframeError: ``NAN_LOSS`` if the loss diverges
    """
    config = config or ProbeConfig()
    x, y = ds.part("train")
    rng = np.random.default_rng(config.seed)
    probe = LinearProbe(
        weight=rng.normal(0.0, 0.01, size=(ds.num_classes, ds.dim)),
        bias=np.zeros(ds.num_classes),
    )
    batch_size = config.effective_batch_size(len(y))
    logger.info(
        "fitting probe: %d train rows, %d classes, batch %d, seed %d",
        len(y),
        ds.num_classes,
        batch_size,
        config.seed,
    )

    losses = []
    for epoch in range(config.epochs):
        order = np.arange(len(y)) if batch_size >= len(y) else rng.permutation(len(y))
        batch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            loss, grad_w, grad_b = probe_loss_and_grad(probe, x[batch], y[batch], config.l2)
            if not math.isfinite(loss):
                raise DynoframeError(
                    f"probe loss became {loss} at epoch {epoch + 1}",
                    status=INTERNAL_ERROR,
                    code="NAN_LOSS",
                )
            probe.weight -= config.learning_rate * grad_w
            probe.bias -= config.learning_rate * grad_b
            batch_losses.append(loss * len(batch))
        losses.append(math.fsum(batch_losses) / len(y))
    return ProbeResult(probe, losses)


def probe_accuracy(probe: LinearProbe, ds: ProbeDataset, split: str = "test") -> float:
    """Top-1 accuracy on ``split``."""
    x, y = ds.part(split)
    if len(y) == 0:
        raise DynoframeError(f"split '{split}' is empty", code="EMPTY_SPLIT")
    return float(np.mean(probe.predict(x) == y))


def correlate(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """
    Pearson r and Spearman rho (average ranks for ties).

    Raises:
        DynoframeError: ``LENGTH_MISMATCH``, ``TOO_FEW_POINTS`` or ``CONSTANT_INPUT``
    """
    if len(xs) != len(ys):
        raise DynoframeError(
            f"xs and ys differ in length ({len(xs)} vs {len(ys)})", code="LENGTH_MISMATCH"
        )
    if len(xs) < 3:
        raise DynoframeError("correlation needs at least 3 points", code="TOO_FEW_POINTS")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DynoframeError("correlation is undefined for constant input", code="CONSTANT_INPUT")
    pearson = stats.pearsonr(x, y)[0]
    spearman = stats.spearmanr(x, y)[0]
    return float(pearson), float(spearman)


def append_scatter_row(
    path: str, representation: str, probe_acc: float, task_metric: Optional[float]
) -> None:
    """Append one row to the scatter CSV, writing the header for a new file."""
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new_file:
            writer.writerow(SCATTER_COLUMNS)
        metric = "" if task_metric is None else repr(float(task_metric))
        writer.writerow([representation, repr(float(probe_acc)), metric])


def read_scatter(
    path: str, x_column: str = "probe_acc", y_column: str = "task_metric"
) -> Tuple[List[float], List[float]]:
    """Two numeric columns of a scatter CSV; rows with a blank cell are skipped."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise DynoframeError(f"file not found: {path}", code="FILE_NOT_FOUND")
    if rows and (x_column not in rows[0] or y_column not in rows[0]):
        raise DynoframeError(
            f"{path}: columns {x_column!r} and {y_column!r} are required", code="SCHEMA_ERROR"
        )
    xs, ys = [], []
    for line, row in enumerate(rows, start=2):
        if not row[x_column] or not row[y_column]:
            continue
        try:
            xs.append(float(row[x_column]))
            ys.append(float(row[y_column]))
        except ValueError:
            raise DynoframeError(f"{path}: line {line} is not numeric", code="SCHEMA_ERROR")
    return xs, ys
