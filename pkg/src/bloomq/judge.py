"""LLM-as-judge evaluation: blinded prompt, structured parse, gating replay.

The judge sees only the course topic and the question text, never the
generating model, strategy, or the level the prompt asked for. Its raw
verdicts are replayed through the rubric session engine so that anything it
answered past a stopping point is discarded, and anything it skipped before
one fails the record.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from . import rubric
from .gateway import Cassette, CompletionRequest, Gateway, GatewayError
from .model import NA, AnnotationRecord, QuestionRecord, RubricItem
from .pipeline import RunManifest
from .prompts import PromptText, TemplateSet, default_templates

REPHRASED_KEY = "REPHRASED"

_VERDICT_LINE = re.compile(r"^\s*([A-Za-z']+)\s*=\s*(.+?)\s*$", re.MULTILINE)


class JudgeError(Exception):
    pass


class Unparseable(JudgeError):
    pass


class IncompleteBeforeStop(JudgeError):
    pass


def build_eval_prompt(
    question: QuestionRecord, templates: TemplateSet | None = None
) -> PromptText:
    """Render the blinded evaluation prompt for one question."""
    templates = templates or default_templates()
    user_part = templates.fragment("eval").format(
        topic=question.topic, question=question.text
    )
    return PromptText(
        user_part=user_part,
        system_part=templates.fragment("eval_persona"),
        feature_trace=frozenset(),
    )


def _normalize_value(value: str) -> str:
    return re.sub(r"[\s-]+", "_", value.strip().strip("\"'.").lower())


def parse_eval_response(text: str) -> dict[str, str]:
    """Extract CriterionName=value lines, case-insensitively.

    Returns a map keyed by canonical rubric item keys, plus REPHRASED when the
    judge supplied a rephrased question. Unknown names are ignored; raises
    Unparseable when no rubric item is recognized at all.
    """
    raw: dict[str, str] = {}
    for match in _VERDICT_LINE.finditer(text):
        name, value = match.group(1), match.group(2)
        if name.strip().upper() == REPHRASED_KEY:
            raw[REPHRASED_KEY] = value.strip().strip("\"'")
            continue
        try:
            item = RubricItem.from_key(name.replace("'", ""))
        except ValueError:
            continue
        raw[item.value] = _normalize_value(value)
    if not any(key != REPHRASED_KEY for key in raw):
        raise Unparseable("no rubric verdict lines recognized")
    return raw


def normalize_gating(raw: dict[str, str], question_id: str, annotator_id: str) -> AnnotationRecord:
    """Replay raw verdicts through the rubric session in item order.

    Verdicts past a stopping point are discarded (they finalize as NA); a
    missing or NA verdict before the stop fails the record.
    """
    if not raw:
        raise Unparseable("empty verdict map")
    state = rubric.start_session(question_id)
    while state.cursor is not None:
        item = state.cursor
        value = raw.get(item.value)
        if value is None or value == NA.lower() or value == NA:
            raise IncompleteBeforeStop(
                f"{question_id}: no verdict for {item.value} before the stopping point"
            )
        rephrase_text = raw.get(REPHRASED_KEY) if item is RubricItem.REPHRASE else None
        if item is RubricItem.REPHRASE and value == "yes" and not rephrase_text:
            raise IncompleteBeforeStop(
                f"{question_id}: Rephrase=yes without a REPHRASED line"
            )
        try:
            state = rubric.apply_response(state, item, value, rephrase_text)
        except rubric.InvalidOption as exc:
            raise IncompleteBeforeStop(f"{question_id}: {exc}") from exc
    return rubric.finalize(state, annotator_id=annotator_id)


@dataclass(frozen=True)
class EvalFailure:
    question_id: str
    error: str
    detail: str

    def to_json_dict(self) -> dict:
        return {"question_id": self.question_id, "error": self.error, "detail": self.detail}


@dataclass
class EvalReport:
    evaluated: int
    failures: list[EvalFailure]

    def to_json_dict(self) -> dict:
        return {
            "evaluated": self.evaluated,
            "failed": len(self.failures),
            "failures": [f.to_json_dict() for f in self.failures],
        }


def check_evaluator_independence(manifest: RunManifest, evaluator_model: str) -> list[str]:
    """Warnings when the judge model is also a generator (same-vendor bias risk)."""
    clashes = [mid for _, mid in manifest.models if mid == evaluator_model]
    if clashes:
        return [
            f"evaluator model {evaluator_model!r} is also a generator model; "
            "judge verdicts may favor its own outputs"
        ]
    return []


def evaluate_questions(
    questions: list[QuestionRecord],
    manifest: RunManifest,
    gateway: Gateway,
    cassette: Cassette,
    evaluator: tuple[str, str],
    out_dir: str | Path | None = None,
    templates: TemplateSet | None = None,
) -> tuple[list[AnnotationRecord], EvalReport]:
    """Judge every question at the manifest's evaluation temperature.

    One retry on an unparseable response, then the question is recorded as a
    failure; at temperature 0 further retries cannot change the output.
    """
    provider_id, model_id = evaluator
    annotator_id = f"llm:{model_id}"
    records: list[AnnotationRecord] = []
    failures: list[EvalFailure] = []

    for question in questions:
        prompt = build_eval_prompt(question, templates=templates)
        request = CompletionRequest(
            provider_id=provider_id,
            model_id=model_id,
            prompt=prompt,
            temperature=manifest.eval_temperature,
            max_tokens=manifest.max_tokens,
        )
        try:
            raw = None
            for attempt in (1, 2):
                result = gateway.complete(request, cassette)
                try:
                    raw = parse_eval_response(result.text)
                    break
                except Unparseable:
                    if attempt == 2:
                        raise
            record = normalize_gating(raw, question.question_id, annotator_id)
        except (JudgeError, GatewayError) as exc:
            failures.append(
                EvalFailure(
                    question_id=question.question_id,
                    error=type(exc).__name__,
                    detail=str(exc),
                )
            )
            continue
        records.append(record)

    report = EvalReport(evaluated=len(records), failures=failures)
    if out_dir is not None:
        from .storage import write_json_atomic, write_jsonl_atomic

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_jsonl_atomic(
            out_dir / "auto_annotations.jsonl", (r.to_json_dict() for r in records)
        )
        write_json_atomic(out_dir / "eval_report.json", report.to_json_dict())
    return records, report
