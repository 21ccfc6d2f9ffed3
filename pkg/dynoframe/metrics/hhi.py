"""
HHI text metrics with pluggable scorers

Built-in scorers are exact match, token F1 and verb-embedding similarity.
Neural metrics plug in as an external executable that reads one JSON object
``{"pred": ..., "gt": ...}`` per line on standard input and answers with one
JSON object of named values per line on standard output.
"""

import json
import logging
import math
import shlex
import subprocess
from collections import Counter
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..error import DynoframeError, INTERNAL_ERROR
from ..frames import SLOT_TOKENS, HhiAnnotation, Lexicon
from ..structparse import parse_hhi
from ..workspace import check_schema, read_json
from .report import EvalReport, mean_by_id

logger = logging.getLogger(__name__)

EXEC_PREFIX = "exec:"
UNBOUNDED = (-math.inf, math.inf)


class SkipItem(DynoframeError):
    """Raised by a scorer for an item it cannot score; the item is skipped and counted."""


def _normalize(text: str) -> List[str]:
    return text.lower().split()


class HhiScorer:
    """Scores a predicted text against a reference text."""

    name = "scorer"
    default_range = (0.0, 1.0)

    def score(self, pred: str, gt: str) -> Dict[str, float]:
        raise NotImplementedError

    def ranges(self) -> Dict[str, Tuple[float, float]]:
        return {}

    def close(self) -> None:
        pass

    def __enter__(self) -> "HhiScorer":
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        self.close()


class ExactMatchScorer(HhiScorer):
    name = "exact"

    def score(self, pred: str, gt: str) -> Dict[str, float]:
        return {"exact": 1.0 if _normalize(pred) == _normalize(gt) else 0.0}


class TokenF1Scorer(HhiScorer):
    name = "f1"

    def score(self, pred: str, gt: str) -> Dict[str, float]:
        pred_tokens, gt_tokens = _normalize(pred), _normalize(gt)
        if not pred_tokens and not gt_tokens:
            return {"token_f1": 1.0}
        overlap = sum((Counter(pred_tokens) & Counter(gt_tokens)).values())
        if overlap == 0:
            return {"token_f1": 0.0}
        precision = overlap / len(pred_tokens)
        recall = overlap / len(gt_tokens)
        return {"token_f1": 2 * precision * recall / (precision + recall)}


def verb_forms(lexicon: Lexicon) -> Dict[str, str]:
    """Surface form -> verb id for gerunds, lemmas and third-person singular forms."""
    forms: Dict[str, str] = {}
    for verb_id, entry in lexicon.items():
        lemma = entry.lemma
        candidates = [entry.gerund, lemma, lemma + "s", lemma + "es"]
        if lemma.endswith("y") and len(lemma) > 1 and lemma[-2] not in "aeiou":
            candidates.append(lemma[:-1] + "ies")
        for form in candidates:
            forms.setdefault(form, verb_id)
    return forms


def extract_verb(text: str, forms: Mapping[str, str]) -> Optional[str]:
    """First token (slots skipped) that is a known verb form."""
    for token in text.lower().split():
        if token.upper() in SLOT_TOKENS:
            continue
        verb = forms.get(token.strip(".,;:!?"))
        if verb is not None:
            return verb
    return None


def load_embedding_table(path: str) -> Dict[str, np.ndarray]:
    """JSON object mapping verb id to a vector; all vectors share one width."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise DynoframeError(f"{path}: top level must be an object", code="SCHEMA_ERROR")
    table = {}
    width = None
    for verb, vector in data.items():
        if verb == "schema":
            continue
        array = np.asarray(vector, dtype=np.float64)
        if array.ndim != 1 or (width is not None and array.shape[0] != width):
            raise DynoframeError(
                f"{path}: vector for '{verb}' has the wrong shape", code="SCHEMA_ERROR"
            )
        width = array.shape[0]
        table[verb] = array
    return table


class VerbSimScorer(HhiScorer):
    """Cosine similarity between embeddings of the main verbs of both texts."""

    name = "verbsim"

    def __init__(self, lexicon: Lexicon, embeddings: Mapping[str, np.ndarray]):
        self.forms = verb_forms(lexicon)
        self.embeddings = embeddings

    def _vector(self, text: str) -> np.ndarray:
        verb = extract_verb(text, self.forms)
        if verb is None:
            raise SkipItem(f"no lexicon verb in '{text}'", code="NO_VERB")
        if verb not in self.embeddings:
            raise SkipItem(f"no embedding for verb '{verb}'", code="MISSING_EMBEDDING")
        return self.embeddings[verb]

    def score(self, pred: str, gt: str) -> Dict[str, float]:
        a, b = self._vector(pred), self._vector(gt)
        norm = float(np.linalg.norm(a) * np.linalg.norm(b))
        if norm == 0.0:
            raise SkipItem("zero-length verb embedding", code="MISSING_EMBEDDING")
        cosine = float(np.dot(a, b)) / norm
        return {"sim": max(-1.0, min(1.0, cosine))}

    def ranges(self) -> Dict[str, Tuple[float, float]]:
        return {"sim": (-1.0, 1.0)}


class ExecScorer(HhiScorer):
    """Long-lived external scorer process speaking line-delimited JSON."""

    name = "exec"
    default_range = UNBOUNDED

    def __init__(self, command: str, timeout: Optional[float] = None):
        self.command = command
        self.timeout = timeout
        try:
            self.process = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise DynoframeError(
                f"cannot start scorer '{command}': {e}", status=INTERNAL_ERROR, code="SCORER_ERROR"
            )

    def score(self, pred: str, gt: str) -> Dict[str, float]:
        assert self.process.stdin is not None and self.process.stdout is not None
        try:
            self.process.stdin.write(json.dumps({"pred": pred, "gt": gt}) + "\n")
            self.process.stdin.flush()
            line = self.process.stdout.readline()
        except OSError as e:
            raise DynoframeError(
                f"scorer I/O failed: {e}", status=INTERNAL_ERROR, code="SCORER_ERROR"
            )
        if not line:
            raise DynoframeError(
                f"scorer '{self.command}' exited without answering",
                status=INTERNAL_ERROR,
                code="SCORER_ERROR",
            )
        try:
            values = json.loads(line)
        except json.JSONDecodeError as e:
            raise DynoframeError(
                f"scorer answered with invalid JSON: {e.msg}",
                status=INTERNAL_ERROR,
                code="SCORER_ERROR",
            )
        if not isinstance(values, dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values.values()
        ):
            raise DynoframeError(
                "scorer must answer with an object of numbers",
                status=INTERNAL_ERROR,
                code="SCORER_ERROR",
            )
        return {str(k): float(v) for k, v in values.items()}

    def close(self) -> None:
        if self.process.stdin and not self.process.stdin.closed:
            self.process.stdin.close()
        try:
            self.process.wait(timeout=self.timeout or 10)
        except subprocess.TimeoutExpired:
            self.process.kill()
            self.process.wait()


def make_scorer(
    spec: str, lexicon: Optional[Lexicon] = None, embeddings_path: Optional[str] = None
) -> HhiScorer:
    """
    Build a scorer from its command-line name.

    Args:
        spec: ``exact``, ``f1``, ``verbsim`` or ``exec:<command>``
        lexicon: Required for ``verbsim``
        embeddings_path: Verb embedding table, required for ``verbsim``
    """
    if spec == "exact":
        return ExactMatchScorer()
    if spec == "f1":
        return TokenF1Scorer()
    if spec == "verbsim":
        if lexicon is None:
            raise ValueError("lexicon is required")
        if not embeddings_path:
            raise ValueError("embeddings is required")
        return VerbSimScorer(lexicon, load_embedding_table(embeddings_path))
    if spec.startswith(EXEC_PREFIX) and spec[len(EXEC_PREFIX):].strip():
        return ExecScorer(spec[len(EXEC_PREFIX):])
    raise DynoframeError(
        f"unknown scorer '{spec}' (expected exact, f1, verbsim or exec:<path>)",
        code="UNKNOWN_SCORER",
    )


def hhi_from_record(record: Mapping[str, Any]) -> Tuple[str, HhiAnnotation]:
    """``{"id", "text"}`` -> (id, annotation)"""
    check_schema(dict(record), "hhi")
    if "id" not in record or not isinstance(record.get("text"), str):
        raise DynoframeError("HHI records need 'id' and 'text'", code="SCHEMA_ERROR")
    annotation, _ = parse_hhi(record["text"])
    return str(record["id"]), annotation


def eval_hhi(
    preds: Mapping[str, HhiAnnotation],
    gts: Mapping[str, HhiAnnotation],
    scorer: HhiScorer,
    allow_missing: bool = False,
) -> EvalReport:
    """
    Mean of every scorer output over items.

    Items the scorer cannot handle (for example a verb without an embedding)
    are skipped and counted in ``details["skipped"]``.

    Raises:
        DynoframeError: ``ID_MISMATCH`` or ``EMPTY_DATASET``
    """
    if not gts:
        raise DynoframeError("no ground-truth items to evaluate", code="EMPTY_DATASET")
    extra = sorted(set(preds) - set(gts))
    missing = sorted(set(gts) - set(preds))
    if extra or (missing and not allow_missing):
        first = (extra or missing)[0]
        raise DynoframeError(
            f"prediction and ground-truth ids differ (first: '{first}')", code="ID_MISMATCH"
        )

    values: Dict[str, Dict[str, float]] = {}
    rows = []
    skipped = []
    for item_id in sorted(gts):
        pred = preds.get(item_id)
        try:
            scores = scorer.score(pred.text if pred is not None else "", gts[item_id].text)
        except SkipItem as e:
            logger.debug("skipping HHI item %s: %s", item_id, e.message)
            skipped.append({"id": item_id, "code": e.code, "message": e.message})
            continue
        rows.append({"id": item_id, **scores})
        for name, value in scores.items():
            values.setdefault(name, {})[item_id] = value

    if skipped:
        logger.warning("%d HHI items skipped by scorer %s", len(skipped), scorer.name)
    metrics: Dict[str, Optional[float]] = {
        name: mean_by_id(per_item) for name, per_item in sorted(values.items())
    }
    ranges = scorer.ranges()
    return EvalReport(
        task="hhi",
        scenario=scorer.name,
        metrics=metrics,
        details={
            "items": len(gts),
            "scored": len(rows),
            "skipped": len(skipped),
            "skipped_items": skipped,
        },
        items=rows,
        ranges={name: ranges.get(name, scorer.default_range) for name in metrics},
    )
