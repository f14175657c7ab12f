from __future__ import annotations

import pytest

from bloomq.model import ITEM_ORDER, NA, BloomLevel, RubricItem, validate_record
from bloomq.rubric import (
    InvalidOption,
    MissingRephraseText,
    NotComplete,
    OutOfOrder,
    apply_response,
    finalize,
    is_high_quality,
    skill_adheres,
    start_session,
)
from conftest import build_record, full_yes_responses
from oracles import enumerate_session_vectors


def drive(answers: list[tuple[str, str]], rephrase_text: str | None = None):
    """Apply (item_key, response) pairs in order and return the final state."""
    state = start_session("q1")
    for key, response in answers:
        item = RubricItem.from_key(key)
        text = rephrase_text if (item is RubricItem.REPHRASE and response == "yes") else None
        state = apply_response(state, item, response, text)
    return state


class TestSessionFlow:
    def test_initial_cursor_is_understandable(self):
        state = start_session("q1")
        assert state.cursor is RubricItem.UNDERSTANDABLE
        assert state.answered == ()

    def test_sessions_are_independent(self):
        a = start_session("q1")
        b = apply_response(start_session("q1"), RubricItem.UNDERSTANDABLE, "no")
        assert a.cursor is RubricItem.UNDERSTANDABLE
        assert b.cursor is None

    def test_finalize_before_done_raises(self):
        with pytest.raises(NotComplete):
            finalize(start_session("q1"))

    def test_understandable_no_stops_and_finalizes_eight_nas(self):
        state = drive([("Understandable", "no")])
        assert state.done
        record = finalize(state)
        assert record.responses[RubricItem.UNDERSTANDABLE] == "no"
        assert all(record.responses[item] == NA for item in ITEM_ORDER[1:])

    def test_group2_items_never_stop(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "no"),
            ("Grammatical", "no"),
        ])
        assert state.cursor is RubricItem.CLEAR

    def test_clear_no_stops_with_five_nas(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "no"),
        ])
        record = finalize(state)
        for key in ("Rephrase", "Answerable", "Central", "WouldYouUseIt", "BloomsLevel"):
            assert record.responses[RubricItem.from_key(key)] == NA

    def test_clear_yes_skips_rephrase(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "yes"),
        ])
        assert state.cursor is RubricItem.ANSWERABLE

    def test_rephrase_yes_requires_text_then_continues(self):
        base = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "more_or_less"),
        ])
        assert base.cursor is RubricItem.REPHRASE
        with pytest.raises(MissingRephraseText):
            apply_response(base, RubricItem.REPHRASE, "yes")
        state = apply_response(base, RubricItem.REPHRASE, "yes", "A clearer version?")
        assert state.cursor is RubricItem.ANSWERABLE
        assert state.rephrased_text == "A clearer version?"

    def test_rephrase_no_stops(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "more_or_less"),
            ("Rephrase", "no"),
        ])
        assert state.done
        record = finalize(state)
        for key in ("Answerable", "Central", "WouldYouUseIt", "BloomsLevel"):
            assert record.responses[RubricItem.from_key(key)] == NA

    def test_answerable_no_stops_with_three_nas(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "yes"),
            ("Answerable", "no"),
        ])
        record = finalize(state)
        # Oracle: exactly the items after the stop finalize NA.
        expected_na = {RubricItem.REPHRASE, RubricItem.CENTRAL,
                       RubricItem.WOULD_YOU_USE_IT, RubricItem.BLOOMS_LEVEL}
        actual_na = {item for item in ITEM_ORDER if record.responses[item] == NA}
        assert actual_na == expected_na

    def test_central_no_still_asks_would_you_use_it(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "yes"),
            ("Answerable", "yes"),
            ("Central", "no"),
        ])
        assert state.cursor is RubricItem.WOULD_YOU_USE_IT
        record = finalize(apply_response(state, RubricItem.WOULD_YOU_USE_IT, "yes"))
        assert record.responses[RubricItem.BLOOMS_LEVEL] == NA

    def test_would_you_use_it_no_gates_blooms(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "yes"),
            ("Answerable", "yes"),
            ("Central", "yes"),
            ("WouldYouUseIt", "no"),
        ])
        assert state.done
        assert finalize(state).responses[RubricItem.BLOOMS_LEVEL] == NA

    def test_full_path_finalizes_with_single_na(self):
        state = drive([
            ("Understandable", "yes"),
            ("TopicRelated", "yes"),
            ("Grammatical", "yes"),
            ("Clear", "yes"),
            ("Answerable", "yes"),
            ("Central", "yes"),
            ("WouldYouUseIt", "yes"),
            ("BloomsLevel", "analyze"),
        ])
        record = finalize(state)
        assert record.responses[RubricItem.BLOOMS_LEVEL] == "analyze"
        na_items = [item for item in ITEM_ORDER if record.responses[item] == NA]
        assert na_items == [RubricItem.REPHRASE]


class TestErrors:
    def test_out_of_order(self):
        with pytest.raises(OutOfOrder):
            apply_response(start_session("q1"), RubricItem.CLEAR, "yes")

    def test_apply_after_done_always_errors(self):
        state = drive([("Understandable", "no")])
        for item in ITEM_ORDER:
            for option in item.options:
                with pytest.raises(OutOfOrder):
                    apply_response(state, item, option, "text")

    def test_na_is_not_a_legal_input(self):
        with pytest.raises(InvalidOption):
            apply_response(start_session("q1"), RubricItem.UNDERSTANDABLE, NA)

    def test_unknown_option_rejected(self):
        with pytest.raises(InvalidOption):
            apply_response(start_session("q1"), RubricItem.UNDERSTANDABLE, "maybe")


class TestProperties:
    def test_every_session_path_passes_validate_record(self):
        for vector in enumerate_session_vectors():
            from oracles import record_from_vector

            assert validate_record(record_from_vector(vector)) == []

    def test_rephrased_text_recorded_only_on_rephrase_yes_paths(self):
        vectors = enumerate_session_vectors()
        for vector in vectors:
            clear, rephrase = vector[3], vector[4]
            expected = clear == "more_or_less" and rephrase == "yes"
            assert vector[-1] is expected


HQ_TRUTH_TABLE = [
    # (description, overrides, rephrased_text, expected)
    ("all yes", full_yes_responses(), None, True),
    ("would use it maybe", {**full_yes_responses(), "WouldYouUseIt": "maybe"}, None, True),
    (
        "clear more_or_less with successful rephrase",
        {**full_yes_responses(clear="more_or_less"), "Rephrase": "yes"},
        "clearer?",
        True,
    ),
    (
        "clear more_or_less rephrase declined",
        {
            "Understandable": "yes", "TopicRelated": "yes", "Grammatical": "yes",
            "Clear": "more_or_less", "Rephrase": "no",
        },
        None,
        False,
    ),
    ("understandable no", {"Understandable": "no"}, None, False),
    (
        "clear no",
        {"Understandable": "yes", "TopicRelated": "yes", "Grammatical": "yes", "Clear": "no"},
        None,
        False,
    ),
    (
        "answerable no",
        {
            "Understandable": "yes", "TopicRelated": "yes", "Grammatical": "yes",
            "Clear": "yes", "Answerable": "no",
        },
        None,
        False,
    ),
    ("would use it no", {**full_yes_responses(), "WouldYouUseIt": "no", "BloomsLevel": NA}, None, False),
    ("grammatical no", {**full_yes_responses(), "Grammatical": "no"}, None, False),
    ("topic unrelated does not disqualify", {**full_yes_responses(), "TopicRelated": "no"}, None, True),
    (
        "central no does not disqualify",
        {**full_yes_responses(), "Central": "no", "BloomsLevel": NA},
        None,
        True,
    ),
    (
        "rephrased but unanswerable",
        {
            "Understandable": "yes", "TopicRelated": "yes", "Grammatical": "yes",
            "Clear": "more_or_less", "Rephrase": "yes", "Answerable": "no",
        },
        "clearer?",
        False,
    ),
]


class TestHighQuality:
    @pytest.mark.parametrize(
        "description,overrides,rephrased,expected",
        HQ_TRUTH_TABLE,
        ids=[row[0] for row in HQ_TRUTH_TABLE],
    )
    def test_truth_table(self, description, overrides, rephrased, expected):
        record = build_record(overrides, rephrased_text=rephrased)
        assert validate_record(record) == [], description
        assert is_high_quality(record) is expected

    def test_strict_mode_adds_topic_and_central(self):
        topic_no = build_record({**full_yes_responses(), "TopicRelated": "no"})
        assert is_high_quality(topic_no) is True
        assert is_high_quality(topic_no, strict=True) is False


class TestSkillAdheres:
    def test_equal_label_matches(self):
        record = build_record(full_yes_responses(blooms="apply"))
        assert skill_adheres(record, BloomLevel.APPLY) is True

    def test_na_never_matches(self):
        record = build_record({"Understandable": "no"})
        assert all(not skill_adheres(record, level) for level in BloomLevel)

    def test_mismatch(self):
        record = build_record(full_yes_responses(blooms="analyze"))
        assert skill_adheres(record, BloomLevel.APPLY) is False

    def test_exactly_one_level_matches_when_labeled(self):
        record = build_record(full_yes_responses(blooms="create"))
        matches = [level for level in BloomLevel if skill_adheres(record, level)]
        assert matches == [BloomLevel.CREATE]
