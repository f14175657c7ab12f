"""Flat-file persistence: JSONL datasets, manifests, reports, external ingest.

All writes go through a temp-file-plus-rename so a crash never leaves a torn
dataset behind.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

from .gateway import ProviderSpec
from .model import (
    AnnotationRecord,
    BloomLevel,
    CourseConfig,
    QuestionRecord,
    Strategy,
)
from .pipeline import RunManifest


class StorageError(Exception):
    pass


class SchemaError(StorageError):
    def __init__(self, path: str | Path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class MappingError(StorageError):
    pass


def write_jsonl_atomic(path: str | Path, rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_json_atomic(path: str | Path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, ensure_ascii=False, indent=2)
            handle.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_text_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _iter_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, line_no, f"invalid JSON: {exc}") from exc


def load_questions(path: str | Path) -> list[QuestionRecord]:
    path = Path(path)
    records = []
    for line_no, data in _iter_jsonl(path):
        try:
            records.append(QuestionRecord.from_json_dict(data))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(path, line_no, f"bad question record: {exc}") from exc
    return records


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    path = Path(path)
    records = []
    for line_no, data in _iter_jsonl(path):
        try:
            records.append(AnnotationRecord.from_json_dict(data))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(path, line_no, f"bad annotation record: {exc}") from exc
    return records


def save_questions(path: str | Path, records: Iterable[QuestionRecord]) -> None:
    write_jsonl_atomic(path, (r.to_json_dict() for r in records))


def save_annotations(path: str | Path, records: Iterable[AnnotationRecord]) -> None:
    write_jsonl_atomic(path, (r.to_json_dict() for r in records))


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    data = json.loads(path.read_text("utf-8"))
    course_field = data.get("course", "default")
    if course_field == "default":
        course = CourseConfig.default()
    elif isinstance(course_field, str):
        course = CourseConfig.from_json_dict(
            json.loads((path.parent / course_field).read_text("utf-8"))
        )
    else:
        course = CourseConfig.from_json_dict(course_field)
    providers = {
        pid: ProviderSpec.from_json_dict(pid, spec)
        for pid, spec in (data.get("providers") or {}).items()
    }
    return RunManifest(
        run_id=data["run_id"],
        course=course,
        models=tuple((m["provider_id"], m["model_id"]) for m in data["models"]),
        strategies=tuple(Strategy.from_id(s) for s in data["strategies"]),
        temperature=float(data.get("temperature", 0.9)),
        eval_temperature=float(data.get("eval_temperature", 0.0)),
        seed=int(data.get("seed", 0)),
        cassette=data.get("cassette"),
        max_tokens=int(data.get("max_tokens", 512)),
        providers=providers,
        created_at=data.get("created_at", ""),
    )


REQUIRED_INGEST_FIELDS = ("model", "strategy", "topic", "level", "text")


def _read_tabular(path: Path) -> list[dict]:
    if path.suffix.lower() == ".csv":
        with path.open("r", encoding="utf-8-sig", newline="") as handle:
            return list(csv.DictReader(handle))
    return [data for _, data in _iter_jsonl(path)]


def ingest_external_questions(
    path: str | Path,
    mapping: dict[str, str],
    run_id: str = "ingested",
) -> tuple[list[QuestionRecord], dict[tuple[str, str], int]]:
    """Normalize an externally released question table into QuestionRecords.

    ``mapping`` names the source column/key for each of model, strategy,
    topic, level, and text. Returns the records plus a count per
    (model, strategy) cell.
    """
    unmapped = [f for f in REQUIRED_INGEST_FIELDS if f not in mapping]
    if unmapped:
        raise MappingError(f"mapping missing required fields: {unmapped}")
    path = Path(path)
    rows = _read_tabular(path)

    records = []
    counts: dict[tuple[str, str], int] = {}
    for idx, row in enumerate(rows, start=1):
        missing_cols = [mapping[f] for f in REQUIRED_INGEST_FIELDS if mapping[f] not in row]
        if missing_cols:
            raise MappingError(f"row {idx}: source columns not found: {missing_cols}")
        try:
            strategy = Strategy.from_id(str(row[mapping["strategy"]]))
            level = BloomLevel.from_name(str(row[mapping["level"]]))
        except ValueError as exc:
            raise MappingError(f"row {idx}: {exc}") from exc
        text = str(row[mapping["text"]]).strip()
        if not text:
            raise MappingError(f"row {idx}: empty question text")
        model_id = str(row[mapping["model"]]).strip()
        record = QuestionRecord(
            question_id=f"ext{idx:06d}",
            run_id=run_id,
            model_id=model_id,
            strategy=strategy,
            topic=str(row[mapping["topic"]]).strip(),
            intended_level=level,
            text=text,
            raw_response=text,
        )
        records.append(record)
        key = (model_id, strategy.value)
        counts[key] = counts.get(key, 0) + 1
    return records, counts


def render_table(headers: list[str], rows: list[list[str]]) -> str:
    """Aligned plain-text table."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def fmt_pct(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}%"


def fmt_ratio(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"
