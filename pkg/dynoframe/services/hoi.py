"""
HOI Service
"""

from typing import Any, Dict

from ..frames import catalog_from_records
from ..metrics.hoi import eval_hoi, hoi_detections_from_record, hoi_ground_truth_from_record
from ..metrics.report import EvalReport
from ..workspace import DynoframeWorkspace


class HoiService:
    """Service for HOI detection mAP."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def evaluate(self, eval_data: Dict[str, Any]) -> EvalReport:
        """
        Score HOI detections.

        Args:
            eval_data: Request containing:
                - predictions: JSONL of scored detections per item
                - ground_truth: JSONL of annotated pairs per item
                - catalog: HOI catalog file
                - zero_gt_as_zero: Count classes without ground truth as AP 0

        Returns:
            EvalReport with full, rare and non-rare mAP and per-class rows
        """
        required_fields = ["predictions", "ground_truth", "catalog"]

        for field in required_fields:
            if field not in eval_data or not eval_data[field]:
                raise ValueError(f"{field} is required")

        catalog = catalog_from_records(
            self.workspace.read_json(eval_data["catalog"]), source=eval_data["catalog"]
        )
        dets = [
            det
            for record in self.workspace.read_jsonl(eval_data["predictions"], "hoi-det")
            for det in hoi_detections_from_record(record)
        ]
        gts = [
            gt
            for record in self.workspace.read_jsonl(eval_data["ground_truth"], "hoi-gt")
            for gt in hoi_ground_truth_from_record(record)
        ]
        return eval_hoi(
            dets,
            gts,
            catalog,
            zero_gt_as_zero=bool(eval_data.get("zero_gt_as_zero")),
            mapper=self.workspace.map_items,
        )
