from __future__ import annotations

import random
import re
import threading

import pytest

from bloomq.gateway import CompletionRequest
from bloomq.model import (
    ITEM_ORDER,
    LEVEL_OPTIONS,
    NA,
    AnnotationRecord,
    BloomLevel,
    CourseConfig,
    DEFAULT_SKILL_DEFINITIONS,
    QuestionRecord,
    Strategy,
)
from bloomq.pipeline import RunManifest


@pytest.fixture
def course() -> CourseConfig:
    return CourseConfig(
        course_title="Graduate Data Science",
        audience="graduate students",
        locale_context="India",
        topics=("linear regression", "prompt engineering", "decision trees"),
        skill_definitions=dict(DEFAULT_SKILL_DEFINITIONS),
        example_bank={
            level: (f"Example {level.level_name} question about widgets?",)
            for level in BloomLevel
        },
    )


@pytest.fixture
def manifest(course, tmp_path) -> RunManifest:
    return RunManifest(
        run_id="test-run",
        course=course,
        models=(("stub", "stub-alpha"),),
        strategies=(Strategy.PS1,),
        temperature=0.9,
        seed=7,
        cassette=str(tmp_path / "cassette.jsonl"),
    )


def build_record(
    overrides: dict[str, str] | None = None,
    question_id: str = "q1",
    annotator_id: str = "human:a",
    rephrased_text: str | None = None,
) -> AnnotationRecord:
    """Annotation record with every item NA except the given item-key overrides."""
    responses = {item: NA for item in ITEM_ORDER}
    for key, value in (overrides or {}).items():
        responses[_item_by_key(key)] = value
    return AnnotationRecord(
        question_id=question_id,
        annotator_id=annotator_id,
        responses=responses,
        rephrased_text=rephrased_text,
    )


def _item_by_key(key: str):
    from bloomq.model import RubricItem

    return RubricItem.from_key(key)


def full_yes_responses(blooms: str = "apply", clear: str = "yes") -> dict[str, str]:
    """The all-yes happy path; Rephrase stays NA because Clear=yes."""
    resp = {
        "Understandable": "yes",
        "TopicRelated": "yes",
        "Grammatical": "yes",
        "Clear": clear,
        "Answerable": "yes",
        "Central": "yes",
        "WouldYouUseIt": "yes",
        "BloomsLevel": blooms,
    }
    return resp


def make_question(
    question_id: str = "q1",
    model_id: str = "stub-alpha",
    strategy: Strategy = Strategy.PS1,
    topic: str = "linear regression",
    level: BloomLevel = BloomLevel.APPLY,
    text: str = "What is a residual?",
    run_id: str = "test-run",
) -> QuestionRecord:
    return QuestionRecord(
        question_id=question_id,
        run_id=run_id,
        model_id=model_id,
        strategy=strategy,
        topic=topic,
        intended_level=level,
        text=text,
        raw_response=f"QUESTION: {text}",
    )


class ScriptedProvider:
    """Stub provider driven by a function of the request; records every call."""

    def __init__(self, fn):
        self.fn = fn
        self.calls: list[CompletionRequest] = []
        self._lock = threading.Lock()

    def send(self, request: CompletionRequest) -> str:
        with self._lock:
            self.calls.append(request)
        return self.fn(request)


_STUB_WORDS = [
    "model", "data", "bias", "yield", "train", "error", "variance", "feature",
    "crop", "market", "festival", "monsoon", "traffic", "hindi", "exam",
    "railway", "cricket", "village", "startup", "census", "farmer", "bollywood",
]


def stub_question_response(request: CompletionRequest) -> str:
    """Deterministic pseudo-model output ending in a QUESTION: sentinel line."""
    rng = random.Random(int(request.request_digest[:12], 16))
    words = [rng.choice(_STUB_WORDS) for _ in range(rng.randint(6, 12))]
    return (
        "Step 1: think about the topic.\n"
        "Step 2: draft the question.\n"
        f"QUESTION: How would you {' '.join(words)} in practice?"
    )


def stub_judge_response(request: CompletionRequest) -> str:
    """Deterministic rubric verdicts covering every stopping path; always
    normalizable by the gating replay."""
    seed = int(request.request_digest[:12], 16)
    variant = seed % 6
    level = LEVEL_OPTIONS[seed % len(LEVEL_OPTIONS)]
    if variant == 0:
        lines = [
            "Understandable=yes", "TopicRelated=yes", "Grammatical=yes",
            "Clear=yes", "Answerable=yes", "Central=yes",
            "WouldYouUseIt=yes", f"BloomsLevel={level}",
        ]
    elif variant == 1:
        # Stops at the first item; the stray trailing verdict must be discarded.
        lines = ["Understandable=no", "BloomsLevel=apply"]
    elif variant == 2:
        lines = [
            "Understandable=yes", "TopicRelated=no", "Grammatical=yes", "Clear=no",
        ]
    elif variant == 3:
        lines = [
            "Understandable=yes", "TopicRelated=yes", "Grammatical=yes",
            "CLEAR=More_or_less", "Rephrase=yes",
            "REPHRASED=Could you restate the question more precisely?",
            "Answerable=yes", "Central=yes", "WouldYouUseIt=maybe",
            f"BloomsLevel={level}",
        ]
    elif variant == 4:
        lines = [
            "Understandable=yes", "TopicRelated=yes", "Grammatical=no",
            "Clear=yes", "Answerable=no",
        ]
    else:
        lines = [
            "Understandable=yes", "TopicRelated=yes", "Grammatical=yes",
            "Clear=yes", "Answerable=yes", "Central=no", "WouldYouUseIt=yes",
        ]
    return "I walked the rubric in order.\n" + "\n".join(lines)
