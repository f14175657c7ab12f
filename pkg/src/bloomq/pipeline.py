"""Plans and executes the (model x strategy x topic x level) generation grid.

Every completed plan entry is checkpointed to the output file as it finishes,
so an interrupted run resumes without re-issuing finished requests; the final
dataset is rewritten atomically in plan order. Failures are recorded in the
run report instead of being dropped.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import Cassette, CompletionRequest, Gateway, GatewayError
from .model import (
    LEVELS,
    PARSE_CLEAN,
    PARSE_SALVAGED,
    BloomLevel,
    CourseConfig,
    QuestionRecord,
    Strategy,
    utc_now_iso,
)
from .prompts import FEATURE_EXAMPLE, MissingExample, TemplateSet, build_generation_prompt

QUESTION_SENTINEL = "QUESTION:"


class EmptyResponse(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    """Single source of truth for one generation run."""

    run_id: str
    course: CourseConfig
    models: tuple[tuple[str, str], ...]  # (provider_id, model_id)
    strategies: tuple[Strategy, ...]
    temperature: float = 0.9
    eval_temperature: float = 0.0
    seed: int = 0
    cassette: str | None = None
    max_tokens: int = 512
    providers: dict = field(default_factory=dict)  # provider_id -> ProviderSpec
    created_at: str = field(default_factory=utc_now_iso, compare=False)

    def __post_init__(self) -> None:
        if not self.run_id:
            raise ValueError("run_id must be non-empty")
        if not self.models:
            raise ValueError("manifest needs at least one model")
        if not self.strategies:
            raise ValueError("manifest needs at least one strategy")

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "course": self.course.to_json_dict(),
            "models": [
                {"provider_id": pid, "model_id": mid} for pid, mid in self.models
            ],
            "strategies": [s.value for s in self.strategies],
            "temperature": self.temperature,
            "eval_temperature": self.eval_temperature,
            "seed": self.seed,
            "cassette": self.cassette,
            "max_tokens": self.max_tokens,
            "providers": {
                pid: spec.to_json_dict() for pid, spec in self.providers.items()
            },
            "created_at": self.created_at,
        }


@dataclass(frozen=True)
class PlanEntry:
    provider_id: str
    model_id: str
    strategy: Strategy
    topic: str
    level: BloomLevel

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.model_id, self.strategy.value, self.topic, self.level.level_name)


@dataclass(frozen=True)
class FailureEntry:
    provider_id: str
    model_id: str
    strategy: str
    topic: str
    level: str
    error: str
    detail: str

    def to_json_dict(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "model_id": self.model_id,
            "strategy": self.strategy,
            "topic": self.topic,
            "level": self.level,
            "error": self.error,
            "detail": self.detail,
        }


@dataclass
class RunReport:
    planned: int
    completed: int
    resumed: int
    failures: list[FailureEntry]

    def to_json_dict(self) -> dict:
        return {
            "planned": self.planned,
            "completed": self.completed,
            "resumed": self.resumed,
            "failed": len(self.failures),
            "failures": [f.to_json_dict() for f in self.failures],
        }


def plan_requests(manifest: RunManifest) -> list[PlanEntry]:
    """Full cross product in deterministic order: models, strategies, topics, levels."""
    return [
        PlanEntry(provider_id, model_id, strategy, topic, level)
        for provider_id, model_id in manifest.models
        for strategy in manifest.strategies
        for topic in manifest.course.topics
        for level in LEVELS
    ]


_LIST_MARKER = re.compile(r"^\s*(?:[-*>+]|\d+[.)])\s*")
_WRAPPING = "\"'`“”‘’* \t"


def parse_question(raw_response: str) -> tuple[str, str]:
    """Extract the question text from a model response.

    Text after the last "QUESTION:" sentinel parses as clean; otherwise the
    last non-empty line, stripped of list markers and quoting, is salvaged.
    """
    if not raw_response.strip():
        raise EmptyResponse("model response is empty")

    matches = list(re.finditer(re.escape(QUESTION_SENTINEL), raw_response, re.IGNORECASE))
    if matches:
        candidate = raw_response[matches[-1].end() :].strip().strip(_WRAPPING)
        if candidate:
            return candidate, PARSE_CLEAN

    for line in reversed(raw_response.splitlines()):
        candidate = _LIST_MARKER.sub("", line).strip(_WRAPPING)
        if candidate and candidate.upper() != QUESTION_SENTINEL:
            return candidate, PARSE_SALVAGED
    raise EmptyResponse("model response contains no usable line")


def question_id_for(manifest_run_id: str, entry: PlanEntry) -> str:
    payload = "|".join((manifest_run_id,) + entry.key)
    return "q" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _require_examples(manifest: RunManifest) -> None:
    if any(FEATURE_EXAMPLE in s.features for s in manifest.strategies):
        missing = manifest.course.missing_example_levels()
        if missing:
            raise MissingExample(
                "example bank missing levels required by planned strategies: "
                + ", ".join(lv.level_name for lv in missing)
            )


def run_generation(
    manifest: RunManifest,
    gateway: Gateway,
    cassette: Cassette,
    out_dir: str | Path,
    templates: TemplateSet | None = None,
    workers: int = 8,
) -> tuple[list[QuestionRecord], RunReport]:
    """Execute the plan, checkpointing each record; returns plan-ordered output."""
    _require_examples(manifest)
    plan = plan_requests(manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    questions_path = out_dir / "questions.jsonl"

    existing: dict[tuple, QuestionRecord] = {}
    if questions_path.exists():
        with questions_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = QuestionRecord.from_json_dict(json.loads(line))
                key = (
                    record.model_id,
                    record.strategy.value,
                    record.topic,
                    record.intended_level.level_name,
                )
                existing[key] = record

    pending = [entry for entry in plan if entry.key not in existing]
    completed: dict[tuple, QuestionRecord] = dict(existing)
    failures: list[tuple[int, FailureEntry]] = []
    append_lock = threading.Lock()

    def execute(entry: PlanEntry) -> QuestionRecord:
        prompt = build_generation_prompt(
            entry.strategy,
            manifest.course,
            entry.topic,
            entry.level,
            seed=manifest.seed,
            templates=templates,
        )
        request = CompletionRequest(
            provider_id=entry.provider_id,
            model_id=entry.model_id,
            prompt=prompt,
            temperature=manifest.temperature,
            max_tokens=manifest.max_tokens,
        )
        result = gateway.complete(request, cassette)
        text, flag = parse_question(result.text)
        return QuestionRecord(
            question_id=question_id_for(manifest.run_id, entry),
            run_id=manifest.run_id,
            model_id=entry.model_id,
            strategy=entry.strategy,
            topic=entry.topic,
            intended_level=entry.level,
            text=text,
            raw_response=result.text,
            parse_flag=flag,
        )

    plan_index = {entry.key: i for i, entry in enumerate(plan)}
    if pending:
        with ThreadPoolExecutor(max_workers=min(workers, len(pending))) as pool:
            futures = {pool.submit(execute, entry): entry for entry in pending}
            for future in as_completed(futures):
                entry = futures[future]
                try:
                    record = future.result()
                except (GatewayError, EmptyResponse) as exc:
                    failures.append(
                        (
                            plan_index[entry.key],
                            FailureEntry(
                                provider_id=entry.provider_id,
                                model_id=entry.model_id,
                                strategy=entry.strategy.value,
                                topic=entry.topic,
                                level=entry.level.level_name,
                                error=type(exc).__name__,
                                detail=str(exc),
                            ),
                        )
                    )
                    continue
                completed[entry.key] = record
                with append_lock:
                    with questions_path.open("a", encoding="utf-8") as handle:
                        handle.write(
                            json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n"
                        )

    ordered = [completed[entry.key] for entry in plan if entry.key in completed]
    report = RunReport(
        planned=len(plan),
        completed=len(ordered),
        resumed=len(existing),
        failures=[entry for _, entry in sorted(failures, key=lambda pair: pair[0])],
    )

    from .storage import write_jsonl_atomic, write_json_atomic  # local import, no cycle

    write_jsonl_atomic(questions_path, (r.to_json_dict() for r in ordered))
    write_json_atomic(out_dir / "run_report.json", report.to_json_dict())
    write_json_atomic(out_dir / "manifest.json", manifest.to_json_dict())
    return ordered, report
