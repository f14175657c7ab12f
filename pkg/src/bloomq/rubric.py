"""Hierarchical nine-item rubric session engine.

A session walks the rubric strictly top-to-bottom. Certain answers stop the
session early; every item the cursor never reached finalizes as NA. The
stopping points are:

* Understandable = no        -> stop, items 2..9 NA
* Clear = no                 -> stop, Rephrase..BloomsLevel NA
* Clear = yes                -> Rephrase skipped (NA), continue at Answerable
* Rephrase = no              -> stop, Answerable..BloomsLevel NA
* Answerable = no            -> stop, Central..BloomsLevel NA
* Central = no or
  WouldYouUseIt = no         -> BloomsLevel NA (after WouldYouUseIt is answered)

TopicRelated and Grammatical never stop the session. A "yes" on Rephrase must
carry the rephrased question text, which replaces the displayed text for the
rest of the session only; the stored question is immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import NA, AnnotationRecord, BloomLevel, ITEM_ORDER, RubricItem, utc_now_iso


class RubricError(Exception):
    pass


class OutOfOrder(RubricError):
    pass


class InvalidOption(RubricError):
    pass


class MissingRephraseText(RubricError):
    pass


class NotComplete(RubricError):
    pass


@dataclass(frozen=True)
class RubricState:
    """Immutable in-flight session; ``cursor`` is None once the session is done."""

    question_id: str
    answered: tuple[tuple[RubricItem, str], ...] = ()
    cursor: RubricItem | None = RubricItem.UNDERSTANDABLE
    rephrased_text: str | None = None

    @property
    def done(self) -> bool:
        return self.cursor is None

    def response(self, item: RubricItem) -> str | None:
        for key, value in self.answered:
            if key is item:
                return value
        return None


def start_session(question_id: str) -> RubricState:
    return RubricState(question_id=question_id)


def apply_response(
    state: RubricState,
    item: RubricItem,
    response: str,
    rephrase_text: str | None = None,
) -> RubricState:
    """Record one answer and advance the cursor per the gating rules.

    ``rephrase_text`` is required exactly when answering Rephrase with "yes".
    NA is never a legal input; it only arises through finalize().
    """
    if state.cursor is None:
        raise OutOfOrder(f"session for {state.question_id} is already complete")
    if item is not state.cursor:
        raise OutOfOrder(f"expected {state.cursor.value}, got {item.value}")
    if response not in item.options:
        raise InvalidOption(f"{item.value} does not admit {response!r}")

    rephrased = state.rephrased_text
    if item is RubricItem.REPHRASE and response == "yes":
        if rephrase_text is None or not rephrase_text.strip():
            raise MissingRephraseText("Rephrase=yes requires the rephrased question text")
        rephrased = rephrase_text.strip()

    answered = state.answered + ((item, response),)
    cursor = _next_cursor(item, response, dict(answered))
    return RubricState(
        question_id=state.question_id,
        answered=answered,
        cursor=cursor,
        rephrased_text=rephrased,
    )


def _next_cursor(
    item: RubricItem, response: str, answered: dict[RubricItem, str]
) -> RubricItem | None:
    if item is RubricItem.UNDERSTANDABLE:
        return RubricItem.TOPIC_RELATED if response == "yes" else None
    if item is RubricItem.TOPIC_RELATED:
        return RubricItem.GRAMMATICAL
    if item is RubricItem.GRAMMATICAL:
        return RubricItem.CLEAR
    if item is RubricItem.CLEAR:
        if response == "yes":
            return RubricItem.ANSWERABLE
        if response == "more_or_less":
            return RubricItem.REPHRASE
        return None
    if item is RubricItem.REPHRASE:
        return RubricItem.ANSWERABLE if response == "yes" else None
    if item is RubricItem.ANSWERABLE:
        return RubricItem.CENTRAL if response == "yes" else None
    if item is RubricItem.CENTRAL:
        return RubricItem.WOULD_YOU_USE_IT
    if item is RubricItem.WOULD_YOU_USE_IT:
        if answered[RubricItem.CENTRAL] == "no" or response == "no":
            return None
        return RubricItem.BLOOMS_LEVEL
    return None  # BloomsLevel ends the session


def finalize(state: RubricState, annotator_id: str = "human:anonymous") -> AnnotationRecord:
    """Fill every unanswered item with NA and emit the completed record."""
    if state.cursor is not None:
        raise NotComplete(f"session cursor still at {state.cursor.value}")
    answered = dict(state.answered)
    responses = {item: answered.get(item, NA) for item in ITEM_ORDER}
    return AnnotationRecord(
        question_id=state.question_id,
        annotator_id=annotator_id,
        responses=responses,
        rephrased_text=state.rephrased_text,
        completed_at=utc_now_iso(),
    )


def is_high_quality(record: AnnotationRecord, strict: bool = False) -> bool:
    """High-quality predicate over a completed record.

    Understandable, Grammatical and Answerable must be "yes", WouldYouUseIt
    "yes" or "maybe", and Clear either "yes" or "more_or_less" followed by a
    successful rephrase. ``strict`` additionally demands TopicRelated=yes and
    Central=yes.
    """
    resp = record.responses
    clear_ok = resp[RubricItem.CLEAR] == "yes" or (
        resp[RubricItem.CLEAR] == "more_or_less" and resp[RubricItem.REPHRASE] == "yes"
    )
    ok = (
        resp[RubricItem.UNDERSTANDABLE] == "yes"
        and resp[RubricItem.GRAMMATICAL] == "yes"
        and resp[RubricItem.ANSWERABLE] == "yes"
        and resp[RubricItem.WOULD_YOU_USE_IT] in ("yes", "maybe")
        and clear_ok
    )
    if strict:
        ok = ok and resp[RubricItem.TOPIC_RELATED] == "yes" and resp[RubricItem.CENTRAL] == "yes"
    return ok


def skill_adheres(record: AnnotationRecord, intended: BloomLevel) -> bool:
    """True iff the assigned Bloom label is non-NA and equals the prompted level."""
    label = record.responses[RubricItem.BLOOMS_LEVEL]
    return label != NA and label == intended.level_name
