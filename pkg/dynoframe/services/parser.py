"""
Parser Service
"""

import logging
from typing import Any, Dict, List, Tuple

from ..error import DynoframeError, FrameParseError
from ..frames import Lexicon, SemanticFrame, lexicon_from_records
from ..structparse import (
    PARSE_MODES,
    STRICT,
    parse_frame,
    parse_hhi,
    serialize_frame,
    serialize_hhi,
)
from ..workspace import DynoframeWorkspace, parse_jsonl, schema_tag, write_text

logger = logging.getLogger(__name__)

FRAME = "frame"
HHI = "hhi"
KINDS = (FRAME, HHI)


def _items(lines: List[str], source: str) -> List[Tuple[str, List[str]]]:
    """
    (id, texts) per non-blank line.

    A line is either raw structured text (its id is the line number) or a JSON
    object with ``id`` and ``text`` or a ``hypotheses`` list of texts.
    """
    items = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if not line.lstrip().startswith("{"):
            items.append((str(lineno), [line]))
            continue
        record = parse_jsonl([line], source=f"{source}:{lineno}")[0]
        texts = record.get("hypotheses")
        if texts is None:
            texts = [record.get("text")]
        if not all(isinstance(t, str) for t in texts):
            raise DynoframeError(
                f"{source}: line {lineno} needs a 'text' string or a 'hypotheses' list of strings",
                code="SCHEMA_ERROR",
            )
        items.append((str(record.get("id", lineno)), list(texts)))
    return items


class ParserService:
    """Service for converting between frames and structured text."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def load_lexicon(self, path: str) -> Lexicon:
        lexicon = lexicon_from_records(self.workspace.read_json(path), source=path)
        logger.info("loaded lexicon %s with %d verbs", path, len(lexicon))
        return lexicon

    def parse(self, parse_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Parse structured text into frames (or HHI annotations).

        Args:
            parse_data: Request containing:
                - input: Text file ('-' for standard input)
                - lexicon: Lexicon file (frames only)
                - mode: ``strict`` (default) or ``tolerant``
                - kind: ``frame`` (default) or ``hhi``
                - output: Optional JSONL file; records go to standard output otherwise

        Returns:
            Dictionary with the parsed ``records`` and a ``summary`` of counts
        """
        required_fields = ["input"]
        kind = parse_data.get("kind") or FRAME
        if kind == FRAME:
            required_fields.append("lexicon")

        for field in required_fields:
            if field not in parse_data or not parse_data[field]:
                raise ValueError(f"{field} is required")

        mode = parse_data.get("mode") or STRICT
        if mode not in PARSE_MODES:
            raise ValueError(f"mode must be one of {PARSE_MODES}")
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

        source = parse_data["input"]
        items = _items(self.workspace.read_lines(source), source)
        if kind == HHI:
            records = [self._hhi_record(item_id, texts[0]) for item_id, texts in items]
            slotted = sum(1 for r in records if r["participants"])
            summary = {"items": len(records), "slotted": slotted}
        else:
            lexicon = self.load_lexicon(parse_data["lexicon"])
            records = [
                self._frame_record(item_id, texts, lexicon, mode) for item_id, texts in items
            ]
            summary = {
                "items": len(records),
                "texts": sum(len(texts) for _, texts in items),
                "parsed": sum(len(r["hypotheses"]) for r in records),
                "recovered": sum(1 for r in records for d in r["diagnostics"] if d["recovered"]),
                "failed": sum(len(r["errors"]) for r in records),
                "mode": mode,
            }
            if summary["failed"]:
                logger.warning(
                    "%d of %d texts failed to parse", summary["failed"], summary["texts"]
                )
            if summary["recovered"]:
                logger.info("tolerant parser repaired %d texts", summary["recovered"])

        self._write(parse_data.get("output"), records)
        return {"records": records, "summary": summary}

    def _frame_record(
        self, item_id: str, texts: List[str], lexicon: Lexicon, mode: str
    ) -> Dict[str, Any]:
        hypotheses, diagnostics, errors = [], [], []
        for text in texts:
            try:
                frame, diag = parse_frame(text, lexicon, mode)
            except FrameParseError as e:
                logger.debug("item %s: %s", item_id, e)
                errors.append(e.to_dict())
                continue
            hypotheses.append(frame.to_json())
            diagnostics.append(diag.to_dict())
        return {
            "schema": schema_tag("sir-pred"),
            "id": item_id,
            "hypotheses": hypotheses,
            "diagnostics": diagnostics,
            "errors": errors,
        }

    @staticmethod
    def _hhi_record(item_id: str, text: str) -> Dict[str, Any]:
        annotation, diag = parse_hhi(text)
        return {
            "schema": schema_tag("hhi"),
            "id": item_id,
            "text": annotation.text,
            "participants": annotation.participants,
            "slots": dict(annotation.slot_positions),
            "diagnostics": diag.to_dict(),
        }

    def serialize(self, serialize_data: Dict[str, Any]) -> List[str]:
        """
        Render frame (or HHI) records as structured text, one line per record.

        Args:
            serialize_data: Request containing:
                - input: JSONL of ``{"verb", "roles"}`` (or ``{"text"}`` for HHI)
                - lexicon: Lexicon file (frames only)
                - kind: ``frame`` (default) or ``hhi``
                - output: Optional text file; lines go to standard output otherwise

        Returns:
            The structured strings in input order
        """
        required_fields = ["input"]
        kind = serialize_data.get("kind") or FRAME
        if kind == FRAME:
            required_fields.append("lexicon")

        for field in required_fields:
            if field not in serialize_data or not serialize_data[field]:
                raise ValueError(f"{field} is required")

        records = self.workspace.read_jsonl(serialize_data["input"])
        if kind == HHI:
            texts = []
            for record in records:
                annotation, _ = parse_hhi(str(record.get("text", "")))
                texts.append(str(serialize_hhi(annotation)))
        else:
            lexicon = self.load_lexicon(serialize_data["lexicon"])
            texts = [
                str(serialize_frame(SemanticFrame.from_json(record, lexicon), lexicon))
                for record in records
            ]

        output = serialize_data.get("output")
        if output:
            write_text(output, "".join(text + "\n" for text in texts))
        else:
            for text in texts:
                self.workspace.emit(text)
        return texts

    def _write(self, output: Any, records: List[Dict[str, Any]]) -> None:
        if output:
            self.workspace.write_jsonl(output, records)
            return
        for record in records:
            self.workspace.emit(self.workspace.dumps(record))
