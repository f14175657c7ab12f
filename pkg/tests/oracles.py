"""Independent brute-force oracles the tests check the implementations against.

Everything here is deliberately written in the most naive way possible and
shares no logic with the package code paths it verifies.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from bloomq.model import (
    ITEM_ORDER,
    NA,
    AnnotationRecord,
    RubricItem,
)
from bloomq import rubric

REPHRASE_STAND_IN = "rephrased question text"

# Canonical vector: the nine responses in item order plus a rephrase-present flag.
Vector = tuple


def vector_of(record: AnnotationRecord) -> Vector:
    return tuple(record.responses[item] for item in ITEM_ORDER) + (
        record.rephrased_text is not None,
    )


def enumerate_session_vectors() -> set[Vector]:
    """Every finalized vector reachable by driving the rubric session engine."""
    results: set[Vector] = set()

    def walk(state: rubric.RubricState) -> None:
        if state.cursor is None:
            record = rubric.finalize(state, annotator_id="human:oracle")
            results.add(vector_of(record))
            return
        item = state.cursor
        for option in item.options:
            text = REPHRASE_STAND_IN if (item is RubricItem.REPHRASE and option == "yes") else None
            walk(rubric.apply_response(state, item, option, text))

    walk(rubric.start_session("oracle-q"))
    return results


def enumerate_all_vectors():
    """The full response space: every item in options+NA, times rephrase present/absent."""
    per_item = [item.options + (NA,) for item in ITEM_ORDER]
    for combo in itertools.product(*per_item):
        yield combo + (False,)
        yield combo + (True,)


def record_from_vector(vector: Vector) -> AnnotationRecord:
    responses = {item: vector[i] for i, item in enumerate(ITEM_ORDER)}
    return AnnotationRecord(
        question_id="oracle-q",
        annotator_id="human:oracle",
        responses=responses,
        rephrased_text=REPHRASE_STAND_IN if vector[-1] else None,
    )


def kappa_oracle(table: list[list[int]]) -> float | None:
    """Plain-float Cohen's kappa; None when expected agreement is 1."""
    n = float(sum(sum(row) for row in table))
    k = len(table)
    p_o = sum(table[i][i] for i in range(k)) / n
    row = [sum(table[i]) / n for i in range(k)]
    col = [sum(table[i][j] for i in range(k)) / n for j in range(k)]
    p_e = sum(row[i] * col[i] for i in range(k))
    if abs(1.0 - p_e) < 1e-15:
        return 1.0 if abs(1.0 - p_o) < 1e-15 else None
    return (p_o - p_e) / (1.0 - p_e)


def weighted_kappa_oracle(table: list[list[int]]) -> float | None:
    """Quadratic-weighted kappa with the explicit (i-j)^2/(k-1)^2 weight matrix."""
    k = len(table)
    n = sum(sum(row) for row in table)
    if k < 2 or n == 0:
        return None
    weights = [[(i - j) ** 2 / (k - 1) ** 2 for j in range(k)] for i in range(k)]
    row = [sum(table[i]) for i in range(k)]
    col = [sum(table[i][j] for i in range(k)) for j in range(k)]
    observed = sum(
        weights[i][j] * table[i][j] for i in range(k) for j in range(k)
    )
    expected = sum(
        weights[i][j] * row[i] * col[j] / n for i in range(k) for j in range(k)
    )
    if expected == 0:
        return None
    return 1.0 - observed / expected


def pinc_oracle(source: list[str], candidate: list[str], n_max: int) -> float:
    """List-based n-gram novelty; skips orders the candidate is too short for."""
    terms = []
    for n in range(1, n_max + 1):
        cand_grams = []
        for i in range(len(candidate) - n + 1):
            gram = tuple(candidate[i : i + n])
            if gram not in cand_grams:
                cand_grams.append(gram)
        if not cand_grams:
            continue
        src_grams = []
        for i in range(len(source) - n + 1):
            gram = tuple(source[i : i + n])
            if gram not in src_grams:
                src_grams.append(gram)
        shared = sum(1 for gram in cand_grams if gram in src_grams)
        terms.append(1 - Fraction(shared, len(cand_grams)))
    return float(sum(terms) / len(terms))
