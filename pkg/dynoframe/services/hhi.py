"""
HHI Service
"""

from typing import Any, Dict

from ..error import DynoframeError
from ..frames import HhiAnnotation, lexicon_from_records
from ..metrics.hhi import eval_hhi, hhi_from_record, make_scorer
from ..metrics.report import EvalReport
from ..workspace import DynoframeWorkspace


class HhiService:
    """Service for scoring human-human interaction descriptions."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def _annotations(self, path: str) -> Dict[str, HhiAnnotation]:
        annotations: Dict[str, HhiAnnotation] = {}
        for record in self.workspace.read_jsonl(path, "hhi"):
            item_id, annotation = hhi_from_record(record)
            if item_id in annotations:
                raise DynoframeError(f"{path}: duplicate id '{item_id}'", code="DUPLICATE_ID")
            annotations[item_id] = annotation
        return annotations

    def evaluate(self, eval_data: Dict[str, Any]) -> EvalReport:
        """
        Score HHI texts with a built-in or external scorer.

        Args:
            eval_data: Request containing:
                - predictions: JSONL of ``{"id", "text"}``
                - ground_truth: JSONL of ``{"id", "text"}``
                - scorer: ``exact``, ``f1``, ``verbsim`` or ``exec:<command>``
                - lexicon: Lexicon file (``verbsim`` only)
                - embeddings: Verb embedding table (``verbsim`` only)
                - allow_missing: Score items without a prediction against empty text

        Returns:
            EvalReport with the mean of every scorer output
        """
        required_fields = ["predictions", "ground_truth", "scorer"]

        for field in required_fields:
            if field not in eval_data or not eval_data[field]:
                raise ValueError(f"{field} is required")

        lexicon = None
        if eval_data.get("lexicon"):
            lexicon = lexicon_from_records(
                self.workspace.read_json(eval_data["lexicon"]), source=eval_data["lexicon"]
            )
        embeddings = eval_data.get("embeddings")
        if embeddings:
            self.workspace.track(embeddings)

        preds = self._annotations(eval_data["predictions"])
        gts = self._annotations(eval_data["ground_truth"])
        with make_scorer(eval_data["scorer"], lexicon, embeddings) as scorer:
            return eval_hhi(preds, gts, scorer, allow_missing=bool(eval_data.get("allow_missing")))
