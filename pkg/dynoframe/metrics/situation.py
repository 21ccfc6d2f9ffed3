"""
Situation recognition (SiR) and grounded situation recognition (GSR) metrics

An item is scored on the first hypothesis, within the scenario's rank budget,
whose verb equals the ground-truth verb. A predicted noun is right when it
equals that role's noun in any annotator frame (the empty filler matches an
empty filler). For grounded metrics the same annotator's box must also match:
IoU >= 0.5, or both boxes absent.
"""

import functools
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from ..error import DynoframeError
from ..frames import (
    BoundingBox,
    GroundedFrame,
    Lexicon,
    SemanticFrame,
    frame_from_roles,
    validate_frame,
)
from ..workspace import check_schema
from .boxes import box_matches
from .report import EvalReport, ItemMapper, mean_by_id, sequential_map

logger = logging.getLogger(__name__)

TOP1 = "top1"
TOP5 = "top5"
GTVERB = "gtverb"
SCENARIOS = (TOP1, TOP5, GTVERB)
RANK_BUDGET = {TOP1: 1, TOP5: 5, GTVERB: None}

ANY_ROLE = "any_role"
PER_ROLE = "per_role"
VALUE_MODES = (ANY_ROLE, PER_ROLE)


@dataclass(frozen=True)
class SirPrediction:
    """Ranked verb hypotheses, most confident first."""

    item_id: str
    hypotheses: Tuple[SemanticFrame, ...]


@dataclass(frozen=True)
class SirGroundTruth:
    item_id: str
    verb: str
    frames: Tuple[SemanticFrame, ...]

    def __post_init__(self) -> None:
        _check_annotators(self.item_id, self.verb, [f.verb for f in self.frames])


@dataclass(frozen=True)
class GsrPrediction:
    item_id: str
    hypotheses: Tuple[GroundedFrame, ...]


@dataclass(frozen=True)
class GsrGroundTruth:
    item_id: str
    verb: str
    frames: Tuple[GroundedFrame, ...]

    def __post_init__(self) -> None:
        _check_annotators(self.item_id, self.verb, [f.frame.verb for f in self.frames])


Prediction = Union[SirPrediction, GsrPrediction]
GroundTruth = Union[SirGroundTruth, GsrGroundTruth]


def _check_annotators(item_id: str, verb: str, verbs: Sequence[str]) -> None:
    if not verbs:
        raise DynoframeError(
            f"item {item_id}: needs at least one annotator frame", code="SCHEMA_ERROR"
        )
    if any(v != verb for v in verbs):
        raise DynoframeError(
            f"item {item_id}: annotator frames must all use verb '{verb}'", code="SCHEMA_MISMATCH"
        )


def _grounded(frame: Union[SemanticFrame, GroundedFrame]) -> GroundedFrame:
    if isinstance(frame, GroundedFrame):
        return frame
    return GroundedFrame.create(frame)


def _role_correct(
    role: str, hypothesis: GroundedFrame, annotators: Sequence[GroundedFrame]
) -> Tuple[bool, bool]:
    """(noun correct, noun and box correct) against any annotator."""
    noun = hypothesis.frame.noun(role)
    noun_ok = False
    grounded_ok = False
    for annotator in annotators:
        if annotator.frame.noun(role) != noun:
            continue
        noun_ok = True
        if box_matches(hypothesis.box(role), annotator.box(role)):
            grounded_ok = True
            break
    return noun_ok, grounded_ok


def _aggregate(correct: Sequence[bool], value_mode: str) -> Tuple[float, float]:
    if not correct:
        return 1.0, 1.0
    hits = sum(correct)
    if value_mode == ANY_ROLE:
        value = 1.0 if hits else 0.0
    else:
        value = hits / len(correct)
    return value, 1.0 if hits == len(correct) else 0.0


def score_item(
    pair: Tuple[Optional[Prediction], GroundTruth], scenario: str, value_mode: str
) -> Dict[str, Any]:
    """Per-item scores; a missing prediction scores zero everywhere."""
    prediction, truth = pair
    annotators = [_grounded(frame) for frame in truth.frames]
    budget = RANK_BUDGET[scenario]
    hypotheses = list(prediction.hypotheses) if prediction is not None else []
    if budget is not None:
        hypotheses = hypotheses[:budget]

    chosen = None
    for hypothesis in hypotheses:
        grounded = _grounded(hypothesis)
        if grounded.frame.verb == truth.verb:
            chosen = grounded
            break

    row: Dict[str, Any] = {"id": truth.item_id}
    if chosen is None:
        row.update(verb=0.0, value=0.0, value_all=0.0, grnd_value=0.0, grnd_value_all=0.0)
        return row

    nouns, grounded_roles = [], []
    for role in annotators[0].frame.roles:
        noun_ok, grounded_ok = _role_correct(role, chosen, annotators)
        nouns.append(noun_ok)
        grounded_roles.append(grounded_ok)
    value, value_all = _aggregate(nouns, value_mode)
    grnd_value, grnd_value_all = _aggregate(grounded_roles, value_mode)
    row.update(
        verb=1.0,
        value=value,
        value_all=value_all,
        grnd_value=grnd_value,
        grnd_value_all=grnd_value_all,
    )
    return row


def _align(
    preds: Sequence[Prediction], gts: Sequence[GroundTruth], allow_missing: bool
) -> List[Tuple[Optional[Prediction], GroundTruth]]:
    if not gts:
        raise DynoframeError("no ground-truth items to evaluate", code="EMPTY_DATASET")
    by_id: Dict[str, Prediction] = {}
    for pred in preds:
        if pred.item_id in by_id:
            raise DynoframeError(f"duplicate prediction id '{pred.item_id}'", code="DUPLICATE_ID")
        by_id[pred.item_id] = pred
    gt_ids = set()
    for gt in gts:
        if gt.item_id in gt_ids:
            raise DynoframeError(f"duplicate ground-truth id '{gt.item_id}'", code="DUPLICATE_ID")
        gt_ids.add(gt.item_id)

    extra = sorted(set(by_id) - gt_ids)
    if extra:
        raise DynoframeError(
            f"{len(extra)} prediction ids have no ground truth (first: '{extra[0]}')",
            code="ID_MISMATCH",
        )
    missing = sorted(gt_ids - set(by_id))
    if missing and not allow_missing:
        raise DynoframeError(
            f"{len(missing)} ground-truth ids have no prediction (first: '{missing[0]}')",
            code="ID_MISMATCH",
        )
    if missing:
        logger.warning("%d items have no prediction and score zero", len(missing))
    return [(by_id.get(gt.item_id), gt) for gt in gts]


def _evaluate(
    task: str,
    preds: Sequence[Prediction],
    gts: Sequence[GroundTruth],
    scenario: str,
    value_mode: str,
    allow_missing: bool,
    mapper: Optional[ItemMapper],
    metric_names: Sequence[str],
) -> EvalReport:
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    if value_mode not in VALUE_MODES:
        raise ValueError(f"value_mode must be one of {VALUE_MODES}, got {value_mode!r}")

    pairs = _align(preds, gts, allow_missing)
    mapper = mapper or sequential_map
    rows = mapper(functools.partial(score_item, scenario=scenario, value_mode=value_mode), pairs)
    rows = [{key: row[key] for key in ("id", *metric_names)} for row in rows]
    metrics = {name: mean_by_id({row["id"]: row[name] for row in rows}) for name in metric_names}
    return EvalReport(
        task=task,
        scenario=scenario,
        metrics=metrics,
        details={
            "value_mode": value_mode,
            "items": len(rows),
            "missing_predictions": sum(1 for pred, _ in pairs if pred is None),
        },
        items=sorted(rows, key=lambda row: row["id"]),
    )


def eval_sir(
    preds: Sequence[SirPrediction],
    gts: Sequence[SirGroundTruth],
    scenario: str = TOP1,
    value_mode: str = PER_ROLE,
    allow_missing: bool = False,
    mapper: Optional[ItemMapper] = None,
) -> EvalReport:
    """
    Situation recognition metrics: verb, value and value_all.

    Args:
        preds: Ranked hypotheses per item
        gts: Ground truth with one or more annotator frames per item
        scenario: ``top1``/``top5`` credit the verb within the first 1/5
            hypotheses; ``gtverb`` searches every hypothesis
        value_mode: ``per_role`` averages role correctness; ``any_role`` gives
            credit when at least one role is right
        allow_missing: Score items without a prediction as zero instead of failing
        mapper: Per-item executor (defaults to sequential)

    Returns:
        EvalReport whose metrics are means over items

    Raises:
        DynoframeError: ``ID_MISMATCH``, ``DUPLICATE_ID`` or ``EMPTY_DATASET``
    """
    return _evaluate(
        "sir",
        preds,
        gts,
        scenario,
        value_mode,
        allow_missing,
        mapper,
        ("verb", "value", "value_all"),
    )


def eval_gsr(
    preds: Sequence[GsrPrediction],
    gts: Sequence[GsrGroundTruth],
    scenario: str = TOP1,
    value_mode: str = PER_ROLE,
    allow_missing: bool = False,
    mapper: Optional[ItemMapper] = None,
) -> EvalReport:
    """Grounded situation recognition: the SiR metrics plus grnd_value and grnd_value_all."""
    return _evaluate(
        "gsr",
        preds,
        gts,
        scenario,
        value_mode,
        allow_missing,
        mapper,
        ("verb", "value", "value_all", "grnd_value", "grnd_value_all"),
    )


def _require(record: Mapping[str, Any], key: str, source: str) -> Any:
    if key not in record:
        raise DynoframeError(f"{source}: '{key}' is required", code="SCHEMA_ERROR")
    return record[key]


def _frame(record: Mapping[str, Any], verb: str, lexicon: Lexicon, source: str) -> SemanticFrame:
    roles = record.get("roles") or {}
    if not isinstance(roles, dict):
        raise DynoframeError(f"{source}: 'roles' must be an object", code="SCHEMA_ERROR")
    if verb not in lexicon:
        raise DynoframeError(f"{source}: unknown verb '{verb}'", code="SCHEMA_MISMATCH")
    try:
        frame = frame_from_roles(lexicon, verb, roles)
    except DynoframeError as e:
        raise DynoframeError(f"{source}: {e.message}", code="SCHEMA_MISMATCH")
    violations = validate_frame(frame, lexicon)
    if violations:
        raise DynoframeError(f"{source}: {violations[0]}", code="SCHEMA_MISMATCH")
    return frame


def _boxes(record: Mapping[str, Any], source: str) -> Dict[str, Optional[BoundingBox]]:
    raw = record.get("boxes") or {}
    if not isinstance(raw, dict):
        raise DynoframeError(f"{source}: 'boxes' must be an object", code="SCHEMA_ERROR")
    return {role: BoundingBox.from_list(c) if c is not None else None for role, c in raw.items()}


def _grounded_frame(
    record: Mapping[str, Any], verb: str, lexicon: Lexicon, source: str
) -> GroundedFrame:
    return GroundedFrame.create(_frame(record, verb, lexicon, source), _boxes(record, source))


def sir_ground_truth_from_record(record: Mapping[str, Any], lexicon: Lexicon) -> SirGroundTruth:
    """``{"id", "verb", "frames": [{"roles": {...}}, ...]}``"""
    check_schema(dict(record), "sir-gt")
    item_id = str(_require(record, "id", "ground truth"))
    verb = _require(record, "verb", item_id)
    frames = tuple(
        _frame(f, verb, lexicon, item_id) for f in _require(record, "frames", item_id)
    )
    return SirGroundTruth(item_id, verb, frames)


def sir_prediction_from_record(record: Mapping[str, Any], lexicon: Lexicon) -> SirPrediction:
    """``{"id", "hypotheses": [{"verb", "roles"}, ...]}``; an empty list is a failed prediction."""
    check_schema(dict(record), "sir-pred")
    item_id = str(_require(record, "id", "prediction"))
    hypotheses = tuple(
        _frame(h, _require(h, "verb", item_id), lexicon, item_id)
        for h in record.get("hypotheses") or []
    )
    return SirPrediction(item_id, hypotheses)


def gsr_ground_truth_from_record(record: Mapping[str, Any], lexicon: Lexicon) -> GsrGroundTruth:
    """``{"id", "verb", "frames": [{"roles": {...}, "boxes": {ROLE: [x1, y1, x2, y2] | null}}]}``"""
    check_schema(dict(record), "gsr-gt")
    item_id = str(_require(record, "id", "ground truth"))
    verb = _require(record, "verb", item_id)
    frames = tuple(
        _grounded_frame(f, verb, lexicon, item_id) for f in _require(record, "frames", item_id)
    )
    return GsrGroundTruth(item_id, verb, frames)


def gsr_prediction_from_record(record: Mapping[str, Any], lexicon: Lexicon) -> GsrPrediction:
    check_schema(dict(record), "gsr-pred")
    item_id = str(_require(record, "id", "prediction"))
    hypotheses = tuple(
        _grounded_frame(h, _require(h, "verb", item_id), lexicon, item_id)
        for h in record.get("hypotheses") or []
    )
    return GsrPrediction(item_id, hypotheses)
