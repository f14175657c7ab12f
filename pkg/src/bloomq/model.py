"""Shared domain types: Bloom levels, prompt strategies, course config, records.

Everything here is a plain value type. Timestamps are informational and never
participate in equality, so records can be compared across replayed runs.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources

NA = "NA"

PARSE_CLEAN = "clean"
PARSE_SALVAGED = "salvaged"

ANNOTATOR_PREFIXES = ("human:", "llm:")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@functools.total_ordering
class BloomLevel(Enum):
    """The six cognitive levels of the revised Bloom's taxonomy, in ascending order."""

    REMEMBER = 1
    UNDERSTAND = 2
    APPLY = 3
    ANALYZE = 4
    EVALUATE = 5
    CREATE = 6

    @property
    def ordinal(self) -> int:
        return self.value

    @property
    def level_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> BloomLevel:
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown Bloom level: {name!r}") from None

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, BloomLevel):
            return NotImplemented
        return self.value < other.value


LEVELS = tuple(BloomLevel)

DEFAULT_SKILL_DEFINITIONS: dict[BloomLevel, str] = {
    BloomLevel.REMEMBER: "Retrieve relevant knowledge from long-term memory.",
    BloomLevel.UNDERSTAND: (
        "Construct meaning from instructional messages, including oral, written, "
        "and graphic communication."
    ),
    BloomLevel.APPLY: "Carry out or use a procedure in a given situation.",
    BloomLevel.ANALYZE: (
        "Break material into foundational parts and determine how parts relate to "
        "one another and the overall structure or purpose"
    ),
    BloomLevel.EVALUATE: "Make judgments based on criteria and standards.",
    BloomLevel.CREATE: (
        "Put elements together to form a coherent whole; reorganize into a new "
        "pattern or structure."
    ),
}

# Prompt features a strategy can compose.
FEATURE_COT = "cot"
FEATURE_PERSONA = "persona"
FEATURE_SKILL_NAME = "skill_name"
FEATURE_SKILL_EXPLANATION = "skill_explanation"
FEATURE_EXAMPLE = "example"

ALL_FEATURES = frozenset(
    {FEATURE_COT, FEATURE_PERSONA, FEATURE_SKILL_NAME, FEATURE_SKILL_EXPLANATION, FEATURE_EXAMPLE}
)


class Strategy(str, Enum):
    """Prompt strategies of increasing complexity."""

    PS1 = "PS1"
    PS2 = "PS2"
    PS3 = "PS3"
    PS4 = "PS4"
    PS5 = "PS5"

    @property
    def features(self) -> frozenset[str]:
        return _STRATEGY_FEATURES[self]

    @classmethod
    def from_id(cls, value: str) -> Strategy:
        try:
            return cls(value.strip().upper())
        except ValueError:
            raise ValueError(f"unknown strategy id: {value!r}") from None


_STRATEGY_FEATURES: dict[Strategy, frozenset[str]] = {
    Strategy.PS1: frozenset({FEATURE_SKILL_NAME}),
    Strategy.PS2: frozenset(
        {FEATURE_COT, FEATURE_PERSONA, FEATURE_SKILL_NAME, FEATURE_SKILL_EXPLANATION}
    ),
    Strategy.PS3: frozenset({FEATURE_COT, FEATURE_PERSONA, FEATURE_EXAMPLE}),
    Strategy.PS4: frozenset({FEATURE_COT, FEATURE_PERSONA, FEATURE_SKILL_NAME, FEATURE_EXAMPLE}),
    Strategy.PS5: frozenset(
        {
            FEATURE_COT,
            FEATURE_PERSONA,
            FEATURE_SKILL_NAME,
            FEATURE_SKILL_EXPLANATION,
            FEATURE_EXAMPLE,
        }
    ),
}


@dataclass(frozen=True)
class CourseConfig:
    """Course symbols a generation run draws from: topics, level wording, exemplars."""

    course_title: str
    audience: str
    locale_context: str
    topics: tuple[str, ...]
    skill_definitions: dict[BloomLevel, str]
    example_bank: dict[BloomLevel, tuple[str, ...]]

    def __post_init__(self) -> None:
        if not self.topics:
            raise ValueError("course topics must be non-empty")
        if len(set(self.topics)) != len(self.topics):
            raise ValueError("course topics must not contain duplicates")
        missing = [lv.level_name for lv in LEVELS if lv not in self.skill_definitions]
        if missing:
            raise ValueError(f"skill_definitions missing levels: {missing}")

    def missing_example_levels(self) -> list[BloomLevel]:
        return [lv for lv in LEVELS if not self.example_bank.get(lv)]

    def to_json_dict(self) -> dict:
        return {
            "course_title": self.course_title,
            "audience": self.audience,
            "locale_context": self.locale_context,
            "topics": list(self.topics),
            "skill_definitions": {
                lv.level_name: self.skill_definitions[lv] for lv in LEVELS
            },
            "example_bank": {
                lv.level_name: list(self.example_bank.get(lv, ())) for lv in LEVELS
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> CourseConfig:
        definitions = {
            BloomLevel.from_name(name): text
            for name, text in (data.get("skill_definitions") or {}).items()
        }
        if not definitions:
            definitions = dict(DEFAULT_SKILL_DEFINITIONS)
        bank = {
            BloomLevel.from_name(name): tuple(examples)
            for name, examples in (data.get("example_bank") or {}).items()
        }
        return cls(
            course_title=data["course_title"],
            audience=data.get("audience", "graduate students"),
            locale_context=data.get("locale_context", "India"),
            topics=tuple(data["topics"]),
            skill_definitions=definitions,
            example_bank=bank,
        )

    @classmethod
    def default(cls) -> CourseConfig:
        raw = resources.files("bloomq.data").joinpath("course_default.json").read_text("utf-8")
        return cls.from_json_dict(json.loads(raw))


class RubricItem(str, Enum):
    """The nine hierarchical rubric items, in evaluation order."""

    UNDERSTANDABLE = "Understandable"
    TOPIC_RELATED = "TopicRelated"
    GRAMMATICAL = "Grammatical"
    CLEAR = "Clear"
    REPHRASE = "Rephrase"
    ANSWERABLE = "Answerable"
    CENTRAL = "Central"
    WOULD_YOU_USE_IT = "WouldYouUseIt"
    BLOOMS_LEVEL = "BloomsLevel"

    @property
    def group(self) -> int:
        return _ITEM_GROUPS[self]

    @property
    def options(self) -> tuple[str, ...]:
        return _ITEM_OPTIONS[self]

    @classmethod
    def from_key(cls, key: str) -> RubricItem:
        try:
            return _ITEM_BY_FOLDED_KEY[key.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown rubric item: {key!r}") from None


ITEM_ORDER = tuple(RubricItem)

YES_NO = ("yes", "no")
CLEAR_OPTIONS = ("yes", "more_or_less", "no")
USE_OPTIONS = ("yes", "maybe", "no")
LEVEL_OPTIONS = tuple(lv.level_name for lv in LEVELS)

_ITEM_GROUPS: dict[RubricItem, int] = {
    RubricItem.UNDERSTANDABLE: 1,
    RubricItem.TOPIC_RELATED: 2,
    RubricItem.GRAMMATICAL: 2,
    RubricItem.CLEAR: 2,
    RubricItem.REPHRASE: 3,
    RubricItem.ANSWERABLE: 3,
    RubricItem.CENTRAL: 4,
    RubricItem.WOULD_YOU_USE_IT: 4,
    RubricItem.BLOOMS_LEVEL: 5,
}

_ITEM_OPTIONS: dict[RubricItem, tuple[str, ...]] = {
    RubricItem.UNDERSTANDABLE: YES_NO,
    RubricItem.TOPIC_RELATED: YES_NO,
    RubricItem.GRAMMATICAL: YES_NO,
    RubricItem.CLEAR: CLEAR_OPTIONS,
    RubricItem.REPHRASE: YES_NO,
    RubricItem.ANSWERABLE: YES_NO,
    RubricItem.CENTRAL: YES_NO,
    RubricItem.WOULD_YOU_USE_IT: USE_OPTIONS,
    RubricItem.BLOOMS_LEVEL: LEVEL_OPTIONS,
}

_ITEM_BY_FOLDED_KEY = {item.value.lower(): item for item in RubricItem}


@dataclass(frozen=True)
class QuestionRecord:
    """One generated question with full provenance."""

    question_id: str
    run_id: str
    model_id: str
    strategy: Strategy
    topic: str
    intended_level: BloomLevel
    text: str
    raw_response: str
    parse_flag: str = PARSE_CLEAN
    created_at: str = field(default_factory=utc_now_iso, compare=False)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("question text must be non-empty")
        if self.parse_flag not in (PARSE_CLEAN, PARSE_SALVAGED):
            raise ValueError(f"invalid parse_flag: {self.parse_flag!r}")

    def to_json_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "run_id": self.run_id,
            "model_id": self.model_id,
            "strategy": self.strategy.value,
            "topic": self.topic,
            "intended_level": self.intended_level.level_name,
            "text": self.text,
            "raw_response": self.raw_response,
            "parse_flag": self.parse_flag,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> QuestionRecord:
        return cls(
            question_id=data["question_id"],
            run_id=data["run_id"],
            model_id=data["model_id"],
            strategy=Strategy.from_id(data["strategy"]),
            topic=data["topic"],
            intended_level=BloomLevel.from_name(data["intended_level"]),
            text=data["text"],
            raw_response=data["raw_response"],
            parse_flag=data["parse_flag"],
            created_at=data["created_at"],
        )


@dataclass(frozen=True)
class AnnotationRecord:
    """One evaluator's completed nine-item rubric pass over one question.

    ``responses`` always carries all nine items; gated-off items hold the NA
    sentinel, which is distinct from a "no" answer.
    """

    question_id: str
    annotator_id: str
    responses: dict[RubricItem, str]
    rephrased_text: str | None = None
    completed_at: str = field(default_factory=utc_now_iso, compare=False)

    def __post_init__(self) -> None:
        if self.rephrased_text is not None and not self.rephrased_text.strip():
            object.__setattr__(self, "rephrased_text", None)

    def to_json_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "annotator_id": self.annotator_id,
            "responses": {item.value: self.responses[item] for item in ITEM_ORDER},
            "rephrased_text": self.rephrased_text,
            "completed_at": self.completed_at,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> AnnotationRecord:
        responses = {
            RubricItem.from_key(key): value for key, value in data["responses"].items()
        }
        return cls(
            question_id=data["question_id"],
            annotator_id=data["annotator_id"],
            responses=responses,
            rephrased_text=data.get("rephrased_text"),
            completed_at=data["completed_at"],
        )


@dataclass(frozen=True)
class Violation:
    """A single gating or option inconsistency found in an AnnotationRecord."""

    item: RubricItem | None
    message: str


def validate_record(record: AnnotationRecord) -> list[Violation]:
    """Check that a record's responses, NA pattern, and rephrase field are
    consistent with the hierarchical gating rules.

    Returns an empty list when the record is valid; violations are data, not
    failures.
    """
    violations: list[Violation] = []

    if not record.annotator_id.startswith(ANNOTATOR_PREFIXES):
        violations.append(
            Violation(None, "annotator_id must carry a 'human:' or 'llm:' prefix")
        )

    missing = [item for item in ITEM_ORDER if item not in record.responses]
    for item in missing:
        violations.append(Violation(item, "response missing"))
    if missing:
        return violations

    bad_option = False
    for item in ITEM_ORDER:
        value = record.responses[item]
        if value != NA and value not in item.options:
            violations.append(Violation(item, f"invalid option {value!r}"))
            bad_option = True
    if bad_option:
        return violations

    violations.extend(_gating_violations(record))
    return violations


def _gating_violations(record: AnnotationRecord) -> list[Violation]:
    resp = record.responses
    out: list[Violation] = []
    rephrased_present = record.rephrased_text is not None

    def must_be_na(items: tuple[RubricItem, ...], reason: str) -> None:
        for item in items:
            if resp[item] != NA:
                out.append(Violation(item, f"must be NA {reason}"))

    def rephrase_rule(expected: bool) -> None:
        if rephrased_present and not expected:
            out.append(
                Violation(
                    RubricItem.REPHRASE,
                    "rephrased_text requires Clear=more_or_less and Rephrase=yes",
                )
            )
        elif expected and not rephrased_present:
            out.append(Violation(RubricItem.REPHRASE, "rephrased_text missing"))

    understandable = resp[RubricItem.UNDERSTANDABLE]
    if understandable == NA:
        out.append(Violation(RubricItem.UNDERSTANDABLE, "must always be answered"))
        return out
    if understandable == "no":
        must_be_na(ITEM_ORDER[1:], "after Understandable=no")
        rephrase_rule(False)
        return out

    for item in (RubricItem.TOPIC_RELATED, RubricItem.GRAMMATICAL, RubricItem.CLEAR):
        if resp[item] == NA:
            out.append(Violation(item, "must be answered when Understandable=yes"))
    clear = resp[RubricItem.CLEAR]
    if clear == NA:
        return out

    if clear == "no":
        must_be_na(ITEM_ORDER[4:], "after Clear=no")
        rephrase_rule(False)
        return out

    if clear == "yes":
        if resp[RubricItem.REPHRASE] != NA:
            out.append(Violation(RubricItem.REPHRASE, "must be NA when Clear=yes"))
        out.extend(_tail_violations(record))
        rephrase_rule(False)
        return out

    # clear == more_or_less
    rephrase = resp[RubricItem.REPHRASE]
    if rephrase == NA:
        out.append(Violation(RubricItem.REPHRASE, "must be answered when Clear=more_or_less"))
        return out
    if rephrase == "no":
        must_be_na(ITEM_ORDER[5:], "after Rephrase=no")
        rephrase_rule(False)
        return out
    out.extend(_tail_violations(record))
    rephrase_rule(True)
    return out


def _tail_violations(record: AnnotationRecord) -> list[Violation]:
    resp = record.responses
    out: list[Violation] = []
    answerable = resp[RubricItem.ANSWERABLE]
    if answerable == NA:
        out.append(Violation(RubricItem.ANSWERABLE, "must be answered"))
        return out
    if answerable == "no":
        for item in ITEM_ORDER[6:]:
            if resp[item] != NA:
                out.append(Violation(item, "must be NA after Answerable=no"))
        return out

    for item in (RubricItem.CENTRAL, RubricItem.WOULD_YOU_USE_IT):
        if resp[item] == NA:
            out.append(Violation(item, "must be answered when Answerable=yes"))
    central = resp[RubricItem.CENTRAL]
    use_it = resp[RubricItem.WOULD_YOU_USE_IT]
    if central == NA or use_it == NA:
        return out
    blooms = resp[RubricItem.BLOOMS_LEVEL]
    if central == "no" or use_it == "no":
        if blooms != NA:
            out.append(
                Violation(
                    RubricItem.BLOOMS_LEVEL,
                    "must be NA when Central or WouldYouUseIt is no",
                )
            )
    elif blooms == NA:
        out.append(Violation(RubricItem.BLOOMS_LEVEL, "must be answered"))
    return out
