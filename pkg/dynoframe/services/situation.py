"""
Situation Service
"""

from typing import Any, Dict

from ..frames import lexicon_from_records
from ..metrics.report import EvalReport
from ..metrics.situation import (
    PER_ROLE,
    TOP1,
    eval_gsr,
    eval_sir,
    gsr_ground_truth_from_record,
    gsr_prediction_from_record,
    sir_ground_truth_from_record,
    sir_prediction_from_record,
)
from ..workspace import DynoframeWorkspace


class SituationService:
    """Service for situation recognition and grounded situation recognition scoring."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def evaluate_sir(self, eval_data: Dict[str, Any]) -> EvalReport:
        """
        Score situation recognition predictions.

        Args:
            eval_data: Request containing:
                - predictions: JSONL of ranked hypotheses
                - ground_truth: JSONL of annotator frames
                - lexicon: Lexicon file
                - scenario: ``top1`` (default), ``top5`` or ``gtverb``
                - value_mode: ``per_role`` (default) or ``any_role``
                - allow_missing: Score items without a prediction as zero

        Returns:
            EvalReport with verb, value and value_all
        """
        return self._evaluate(eval_data, grounded=False)

    def evaluate_gsr(self, eval_data: Dict[str, Any]) -> EvalReport:
        """
        Score grounded situation recognition predictions.

        Takes the same request as ``evaluate_sir``; records carry boxes.

        Returns:
            EvalReport with the SiR metrics plus grnd_value and grnd_value_all
        """
        return self._evaluate(eval_data, grounded=True)

    def _evaluate(self, eval_data: Dict[str, Any], grounded: bool) -> EvalReport:
        required_fields = ["predictions", "ground_truth", "lexicon"]

        for field in required_fields:
            if field not in eval_data or not eval_data[field]:
                raise ValueError(f"{field} is required")

        lexicon = lexicon_from_records(
            self.workspace.read_json(eval_data["lexicon"]), source=eval_data["lexicon"]
        )
        if grounded:
            pred_kind, gt_kind = "gsr-pred", "gsr-gt"
            pred_reader, gt_reader, evaluate = (
                gsr_prediction_from_record,
                gsr_ground_truth_from_record,
                eval_gsr,
            )
        else:
            pred_kind, gt_kind = "sir-pred", "sir-gt"
            pred_reader, gt_reader, evaluate = (
                sir_prediction_from_record,
                sir_ground_truth_from_record,
                eval_sir,
            )

        preds = [
            pred_reader(r, lexicon)
            for r in self.workspace.read_jsonl(eval_data["predictions"], pred_kind)
        ]
        gts = [
            gt_reader(r, lexicon)
            for r in self.workspace.read_jsonl(eval_data["ground_truth"], gt_kind)
        ]
        return evaluate(
            preds,
            gts,
            scenario=eval_data.get("scenario") or TOP1,
            value_mode=eval_data.get("value_mode") or PER_ROLE,
            allow_missing=bool(eval_data.get("allow_missing")),
            mapper=self.workspace.map_items,
        )
