"""
HOI detection mAP over full, rare and non-rare class splits
"""

import logging
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..error import DynoframeError
from ..frames import (
    BoundingBox,
    HoiCatalog,
    HoiClass,
    HoiDetection,
    HoiGroundTruth,
    hoi_splits,
)
from ..workspace import check_schema
from .boxes import IOU_THRESHOLD, pair_overlap
from .report import EvalReport, ItemMapper, mean_by_id, sequential_map

logger = logging.getLogger(__name__)


class MatchResult(NamedTuple):
    """Detection indices in rank order and whether each is a true positive."""

    order: List[int]
    flags: List[bool]


def rank_detections(dets: Sequence[HoiDetection]) -> List[int]:
    """Indices by descending score; ties by item id, then position within the item."""
    seen: Dict[str, int] = {}
    keys = []
    for index, det in enumerate(dets):
        position = seen.get(det.item_id, 0)
        seen[det.item_id] = position + 1
        keys.append((-det.score, det.item_id, position, index))
    return [key[-1] for key in sorted(keys)]


def match_hoi(
    dets: Sequence[HoiDetection],
    gts: Sequence[HoiGroundTruth],
    hoi_class: Optional[HoiClass] = None,
) -> MatchResult:
    """
    Greedy one-to-one matching of detections to ground truth of one class.

    A detection is a true positive when an unmatched ground truth of the same
    item overlaps it with min(human IoU, object IoU) >= 0.5; the best
    overlapping ground truth is taken (ties to the lowest index) and cannot be
    matched again.

    Args:
        dets: Detections (filtered to ``hoi_class`` when given)
        gts: Ground truth (filtered to ``hoi_class`` when given)
        hoi_class: Optional (object, action) class to restrict to

    Returns:
        MatchResult over the (filtered) detections
    """
    if hoi_class is not None:
        dets = [d for d in dets if d.hoi_class == hoi_class]
        gts = [g for g in gts if g.hoi_class == hoi_class]

    by_item: Dict[str, List[int]] = {}
    for index, gt in enumerate(gts):
        by_item.setdefault(gt.item_id, []).append(index)

    matched = [False] * len(gts)
    order = rank_detections(dets)
    flags = []
    for det_index in order:
        det = dets[det_index]
        best_index, best_overlap = -1, -1.0
        for gt_index in by_item.get(det.item_id, []):
            if matched[gt_index]:
                continue
            gt = gts[gt_index]
            overlap = pair_overlap(det.human_box, det.object_box, gt.human_box, gt.object_box)
            if overlap >= IOU_THRESHOLD and overlap > best_overlap:
                best_index, best_overlap = gt_index, overlap
        if best_index >= 0:
            matched[best_index] = True
        flags.append(best_index >= 0)
    return MatchResult(order, flags)


def average_precision(flags: Sequence[bool], n_gt: int) -> Optional[float]:
    """
    All-point interpolated AP of a ranked TP/FP list.

    Precision is made non-increasing from the right and integrated exactly over
    recall. Returns None when there is no ground truth.
    """
    if n_gt < 0:
        raise ValueError("n_gt must be non-negative")
    if n_gt == 0:
        return None
    if not len(flags):
        return 0.0

    hits = np.asarray(flags, dtype=np.float64)
    tp = np.cumsum(hits)
    fp = np.cumsum(1.0 - hits)
    recall = tp / n_gt
    precision = tp / (tp + fp)

    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    steps = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def _class_key(hoi_class: HoiClass) -> str:
    return f"{hoi_class[0]}|{hoi_class[1]}"


def class_average_precision(
    group: Tuple[HoiClass, Sequence[HoiDetection], Sequence[HoiGroundTruth]]
) -> Dict[str, Any]:
    hoi_class, dets, gts = group
    result = match_hoi(dets, gts)
    return {
        "object": hoi_class[0],
        "action": hoi_class[1],
        "n_gt": len(gts),
        "n_det": len(dets),
        "tp": sum(result.flags),
        "ap": average_precision(result.flags, len(gts)),
    }


def eval_hoi(
    dets: Sequence[HoiDetection],
    gts: Sequence[HoiGroundTruth],
    catalog: HoiCatalog,
    zero_gt_as_zero: bool = False,
    mapper: Optional[ItemMapper] = None,
) -> EvalReport:
    """
    Per-class AP and mAP over the full, rare and non-rare splits.

    Args:
        dets: Scored detections
        gts: Ground-truth pairs
        catalog: Closed class set with training counts
        zero_gt_as_zero: Count classes without ground truth as AP 0 instead of
            excluding them from the means
        mapper: Per-class executor (defaults to sequential)

    Returns:
        EvalReport with ``map_full``, ``map_rare`` and ``map_nonrare``
        (None for a split with no scorable class) and one row per class

    Raises:
        DynoframeError: ``UNKNOWN_HOI_CLASS`` for a class outside the catalog
    """
    for kind, records in (("detection", dets), ("ground truth", gts)):
        for record in records:
            if record.hoi_class not in catalog:
                raise DynoframeError(
                    f"{kind} in item '{record.item_id}' uses class {record.hoi_class} "
                    "which is not in the catalog",
                    code="UNKNOWN_HOI_CLASS",
                )

    det_groups: Dict[HoiClass, List[HoiDetection]] = {c: [] for c in catalog.classes}
    gt_groups: Dict[HoiClass, List[HoiGroundTruth]] = {c: [] for c in catalog.classes}
    for det in dets:
        det_groups[det.hoi_class].append(det)
    for gt in gts:
        gt_groups[gt.hoi_class].append(gt)

    groups = [(c, det_groups[c], gt_groups[c]) for c in catalog.classes]
    rows = (mapper or sequential_map)(class_average_precision, groups)

    splits = hoi_splits(catalog)
    aps: Dict[HoiClass, Optional[float]] = {}
    for hoi_class, row in zip(catalog.classes, rows):
        ap = row["ap"]
        if ap is None and zero_gt_as_zero:
            ap = 0.0
        aps[hoi_class] = ap
        row["split"] = "rare" if hoi_class in splits.rare else "nonrare"
        row["train_count"] = catalog.train_count(hoi_class)

    metrics: Dict[str, Optional[float]] = {}
    named = (("full", splits.full), ("rare", splits.rare), ("nonrare", splits.nonrare))
    for name, members in named:
        scored = {_class_key(c): aps[c] for c in members if aps[c] is not None}
        metrics[f"map_{name}"] = mean_by_id(scored) if scored else None

    excluded = sum(1 for ap in aps.values() if ap is None)
    if excluded:
        logger.info("%d classes without ground truth excluded from mAP", excluded)
    return EvalReport(
        task="hoi",
        metrics=metrics,
        details={
            "classes": len(catalog),
            "excluded_classes": excluded,
            "zero_gt_as_zero": zero_gt_as_zero,
            "detections": len(dets),
            "ground_truth": len(gts),
        },
        items=rows,
    )


def _box(record: Mapping[str, Any], key: str, source: str) -> BoundingBox:
    if key not in record:
        raise DynoframeError(f"{source}: '{key}' box is required", code="SCHEMA_ERROR")
    return BoundingBox.from_list(record[key])


def _hoi_class(record: Mapping[str, Any], source: str) -> HoiClass:
    try:
        return (str(record["object_class"]), str(record["action"]))
    except KeyError:
        raise DynoframeError(f"{source}: object_class and action are required", code="SCHEMA_ERROR")


def _item_id(record: Mapping[str, Any], source: str) -> str:
    if "id" not in record:
        raise DynoframeError(f"{source}: 'id' is required", code="SCHEMA_ERROR")
    return str(record["id"])


def hoi_ground_truth_from_record(record: Mapping[str, Any]) -> List[HoiGroundTruth]:
    """``{"id", "pairs": [{"human", "object", "object_class", "action"}, ...]}``"""
    check_schema(dict(record), "hoi-gt")
    item_id = _item_id(record, "ground truth")
    return [
        HoiGroundTruth(
            _box(pair, "human", item_id),
            _box(pair, "object", item_id),
            _hoi_class(pair, item_id),
            item_id,
        )
        for pair in record.get("pairs") or []
    ]


def hoi_detections_from_record(record: Mapping[str, Any]) -> List[HoiDetection]:
    """``{"id", "detections": [{"human", "object", "object_class", "action", "score"}, ...]}``"""
    check_schema(dict(record), "hoi-det")
    item_id = _item_id(record, "detections")
    detections = []
    for det in record.get("detections") or []:
        if "score" not in det:
            raise DynoframeError(f"{item_id}: detection score is required", code="SCHEMA_ERROR")
        detections.append(
            HoiDetection(
                _box(det, "human", item_id),
                _box(det, "object", item_id),
                _hoi_class(det, item_id),
                float(det["score"]),
                item_id,
            )
        )
    return detections
