"""
Box overlap
"""

from typing import Optional

from ..frames import BoundingBox

IOU_THRESHOLD = 0.5


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union on continuous pixel coordinates (0.0 when disjoint)."""
    inter_w = min(a.x2, b.x2) - max(a.x1, b.x1)
    inter_h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    inter = inter_w * inter_h
    return inter / (a.area + b.area - inter)


def pair_overlap(
    human_a: BoundingBox, object_a: BoundingBox, human_b: BoundingBox, object_b: BoundingBox
) -> float:
    """A human-object pair overlaps another as much as its worse-matching box does."""
    return min(iou(human_a, human_b), iou(object_a, object_b))


def box_matches(pred: Optional[BoundingBox], gt: Optional[BoundingBox]) -> bool:
    """Grounding check: both boxes absent, or IoU at or above the threshold."""
    if pred is None or gt is None:
        return pred is None and gt is None
    return iou(pred, gt) >= IOU_THRESHOLD
