"""
Dynoframe Workspace

File I/O, input hashing and the worker pool shared by every service.
"""

import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TextIO, TypeVar

from .error import DynoframeError, INTERNAL_ERROR

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

SCHEMA_PREFIX = "dynoframe."


def read_json(path: str) -> Any:
    """
    Read a JSON document.

    Raises:
        DynoframeError: ``FILE_NOT_FOUND`` or ``JSON_PARSE_ERROR`` (with line number)
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise DynoframeError(f"file not found: {path}", code="FILE_NOT_FOUND")
    except OSError as e:
        raise DynoframeError(f"cannot read {path}: {e}", code="READ_ERROR")

    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise DynoframeError(
            f"{path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}",
            code="JSON_PARSE_ERROR",
        )


def parse_jsonl(lines: Iterable[str], source: str = "<stream>") -> List[Dict[str, Any]]:
    """Decode line-delimited JSON objects, skipping blank lines."""
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DynoframeError(
                f"{source}: parse error at line {lineno}: {e.msg}", code="JSON_PARSE_ERROR"
            )
        if not isinstance(record, dict):
            raise DynoframeError(
                f"{source}: line {lineno} is not a JSON object", code="SCHEMA_ERROR"
            )
        records.append(record)
    return records


def read_jsonl(path: str) -> List[Dict[str, Any]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_jsonl(fh, source=path)
    except FileNotFoundError:
        raise DynoframeError(f"file not found: {path}", code="FILE_NOT_FOUND")


def canonical_json(data: Any) -> str:
    """Byte-stable rendering used for reports."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def dumps(record: Dict[str, Any]) -> str:
    """One JSONL line (without the newline)."""
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_jsonl(path: str, records: Iterable[Dict[str, Any]]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps(record))
            fh.write("\n")
            count += 1
    return count


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def check_schema(record: Dict[str, Any], kind: str, source: str = "<stream>") -> None:
    """
    Accept records whose ``schema`` is ``dynoframe.<kind>/<version>`` or absent.

    Raises:
        DynoframeError: ``SCHEMA_ERROR`` for another kind or a malformed tag
    """
    tag = record.get("schema")
    if tag is None:
        return
    expected = f"{SCHEMA_PREFIX}{kind}/"
    if not isinstance(tag, str) or not tag.startswith(expected):
        raise DynoframeError(
            f"{source}: expected schema '{expected}N', got {tag!r}", code="SCHEMA_ERROR"
        )
    version = tag[len(expected):]
    if not version.isdigit():
        raise DynoframeError(f"{source}: bad schema version in {tag!r}", code="SCHEMA_ERROR")


def schema_tag(kind: str, version: int = 1) -> str:
    return f"{SCHEMA_PREFIX}{kind}/{version}"


class DynoframeWorkspace:
    """Shared I/O and execution context handed to every service."""

    def __init__(self, jobs: int = 1, stdout: Optional[TextIO] = None):
        """
        Initialize the workspace.

        Args:
            jobs: Worker processes for per-item work (1 runs inline)
            stdout: Stream reports are written to (defaults to ``sys.stdout``)
        """
        if jobs < 1:
            raise ValueError("jobs must be at least 1")

        self.jobs = jobs
        self.stdout = stdout if stdout is not None else sys.stdout
        self.inputs: Dict[str, str] = {}
        self._pool: Optional[ProcessPoolExecutor] = None

    def read_json(self, path: str) -> Any:
        self._track(path)
        return read_json(path)

    def read_jsonl(self, path: str, kind: Optional[str] = None) -> List[Dict[str, Any]]:
        """Read a JSONL file, checking each record's schema tag when ``kind`` is given."""
        self._track(path)
        records = read_jsonl(path)
        if kind is not None:
            for record in records:
                check_schema(record, kind, source=path)
        logger.info("read %d records from %s", len(records), path)
        return records

    def read_lines(self, path: Optional[str]) -> List[str]:
        """Lines of ``path``, or of standard input when ``path`` is None or '-'."""
        if path is None or path == "-":
            return [line.rstrip("\n") for line in sys.stdin]
        self._track(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return [line.rstrip("\n") for line in fh]
        except FileNotFoundError:
            raise DynoframeError(f"file not found: {path}", code="FILE_NOT_FOUND")

    def write_jsonl(self, path: str, records: Iterable[Dict[str, Any]]) -> int:
        count = write_jsonl(path, records)
        logger.info("wrote %d records to %s", count, path)
        return count

    def dumps(self, record: Dict[str, Any]) -> str:
        return dumps(record)

    def emit(self, text: str) -> None:
        self.stdout.write(text)
        if not text.endswith("\n"):
            self.stdout.write("\n")

    def input_hashes(self) -> Dict[str, str]:
        hashes = {}
        for path in sorted(self.inputs):
            try:
                hashes[path] = file_sha256(path)
            except OSError:
                hashes[path] = "unreadable"
        return hashes

    def map_items(self, func: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """
        Apply ``func`` to every item, in input order.

        ``func`` must be a picklable module-level callable when ``jobs`` > 1.
        """
        if self.jobs == 1 or len(items) < 2:
            return [func(item) for item in items]

        chunksize = max(1, len(items) // (self.jobs * 4))
        if self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.jobs)
        try:
            return list(self._pool.map(func, items, chunksize=chunksize))
        except DynoframeError:
            raise
        except Exception as e:
            self.close()
            raise DynoframeError(
                f"worker pool failed: {e}", status=INTERNAL_ERROR, code="WORKER_ERROR"
            )

    def close(self) -> None:
        """Shut down the worker pool, if one was started; a later map_items starts a new one."""
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def track(self, path: str) -> None:
        """Record an input file for the run manifest."""
        self._track(path)

    def _track(self, path: str) -> None:
        if path and os.path.isfile(path):
            self.inputs[os.path.abspath(path)] = path

    def __repr__(self) -> str:
        return f"DynoframeWorkspace(jobs={self.jobs})"


def captured_workspace(jobs: int = 1) -> "DynoframeWorkspace":
    """Workspace writing to an in-memory buffer (``workspace.stdout.getvalue()``)."""
    return DynoframeWorkspace(jobs=jobs, stdout=io.StringIO())
