"""
Evaluation engine for situation recognition, grounded situation recognition,
HOI detection and HHI description.
"""

from .boxes import IOU_THRESHOLD, iou
from .hhi import (
    ExactMatchScorer,
    ExecScorer,
    HhiScorer,
    TokenF1Scorer,
    VerbSimScorer,
    eval_hhi,
    extract_verb,
    make_scorer,
)
from .hoi import MatchResult, average_precision, eval_hoi, match_hoi
from .report import EvalReport, mean_by_id
from .situation import (
    ANY_ROLE,
    GTVERB,
    PER_ROLE,
    TOP1,
    TOP5,
    GsrGroundTruth,
    GsrPrediction,
    SirGroundTruth,
    SirPrediction,
    eval_gsr,
    eval_sir,
)

__all__ = [
    "ANY_ROLE",
    "EvalReport",
    "ExactMatchScorer",
    "ExecScorer",
    "GTVERB",
    "GsrGroundTruth",
    "GsrPrediction",
    "HhiScorer",
    "IOU_THRESHOLD",
    "MatchResult",
    "PER_ROLE",
    "SirGroundTruth",
    "SirPrediction",
    "TOP1",
    "TOP5",
    "TokenF1Scorer",
    "VerbSimScorer",
    "average_precision",
    "eval_gsr",
    "eval_hhi",
    "eval_hoi",
    "eval_sir",
    "extract_verb",
    "iou",
    "make_scorer",
    "match_hoi",
    "mean_by_id",
]
