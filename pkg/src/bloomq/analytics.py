"""Inter-rater agreement, quality/skill aggregation, and locale-theme counts.

Agreement statistics follow the two-rater chance-corrected scheme:

    kappa   = (p_o - p_e) / (1 - p_e)
    kappa_w = 1 - sum(w_ij * O_ij) / sum(w_ij * E_ij),  w_ij = (i - j)^2 / (k - 1)^2

with expected counts E taken from the product of the raters' marginal
distributions. Pairs where either rater recorded NA are excluded from every
statistic. Both kappas are computed from integer count sums so that exact
fixtures come out exact.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    LEVEL_OPTIONS,
    NA,
    AnnotationRecord,
    BloomLevel,
    QuestionRecord,
    RubricItem,
    Strategy,
)
from .rubric import is_high_quality, skill_adheres


class AnalyticsError(Exception):
    pass


class EmptyDenominator(AnalyticsError):
    pass


class Degenerate(AnalyticsError):
    pass


class MissingAnnotations(AnalyticsError):
    def __init__(self, question_ids: list[str]):
        super().__init__(f"{len(question_ids)} questions lack required annotations")
        self.question_ids = question_ids


POLICY_BOTH_HUMANS = "both-humans"
POLICY_SINGLE = "single"
POLICY_LLM = "llm"
POLICIES = (POLICY_BOTH_HUMANS, POLICY_SINGLE, POLICY_LLM)

# Items the quadratic-weighted kappa applies to, with their category order.
ORDINAL_ORDERINGS: dict[RubricItem, tuple[str, ...]] = {
    RubricItem.CLEAR: ("no", "more_or_less", "yes"),
    RubricItem.WOULD_YOU_USE_IT: ("no", "maybe", "yes"),
    RubricItem.BLOOMS_LEVEL: LEVEL_OPTIONS,
}


@dataclass(frozen=True)
class RatedPair:
    """One rubric item judged by two distinct annotators on the same question."""

    question_id: str
    item: RubricItem
    a: str
    b: str


def make_pairs(
    records: list[AnnotationRecord], annotator_a: str, annotator_b: str
) -> list[RatedPair]:
    """Pair up two annotators' responses over the questions both completed."""
    if annotator_a == annotator_b:
        raise ValueError("annotators must be distinct")
    by_question: dict[str, dict[str, AnnotationRecord]] = {}
    for record in records:
        by_question.setdefault(record.question_id, {})[record.annotator_id] = record
    pairs = []
    for question_id in sorted(by_question):
        sides = by_question[question_id]
        if annotator_a not in sides or annotator_b not in sides:
            continue
        for item in RubricItem:
            pairs.append(
                RatedPair(
                    question_id=question_id,
                    item=item,
                    a=sides[annotator_a].responses[item],
                    b=sides[annotator_b].responses[item],
                )
            )
    return pairs


def _double_non_na(pairs: list[RatedPair], item: RubricItem) -> list[RatedPair]:
    return [p for p in pairs if p.item is item and p.a != NA and p.b != NA]


def percent_agreement(pairs: list[RatedPair], item: RubricItem) -> float | None:
    """Share of double-non-NA pairs that agree; None when that subset is empty."""
    scored = _double_non_na(pairs, item)
    if not scored:
        return None
    return sum(1 for p in scored if p.a == p.b) / len(scored)


def _contingency(
    pairs: list[RatedPair], item: RubricItem, categories: tuple[str, ...]
) -> tuple[list[list[int]], int]:
    scored = _double_non_na(pairs, item)
    if not scored:
        raise EmptyDenominator(f"no double-non-NA pairs for {item.value}")
    index = {c: i for i, c in enumerate(categories)}
    k = len(categories)
    table = [[0] * k for _ in range(k)]
    for pair in scored:
        table[index[pair.a]][index[pair.b]] += 1
    return table, len(scored)


def kappa_from_table(table: list[list[int]]) -> float:
    """Cohen's kappa from a square contingency table of integer counts."""
    k = len(table)
    n = sum(sum(row) for row in table)
    if n == 0:
        raise EmptyDenominator("empty contingency table")
    row_sums = [sum(table[i]) for i in range(k)]
    col_sums = [sum(table[i][j] for i in range(k)) for j in range(k)]
    agree = sum(table[i][i] for i in range(k))
    expected = sum(row_sums[i] * col_sums[i] for i in range(k))
    numerator = n * agree - expected
    denominator = n * n - expected
    if denominator == 0:
        if agree == n:
            return 1.0
        raise Degenerate("expected agreement is 1 with observed disagreement")
    return numerator / denominator


def weighted_kappa_from_table(table: list[list[int]]) -> float:
    """Quadratic-weighted kappa from a contingency table in category order.

    The (k-1)^2 weight normalizer cancels in the observed/expected ratio, so
    the sums use plain squared index distances over integer counts.
    """
    k = len(table)
    n = sum(sum(row) for row in table)
    if n == 0:
        raise EmptyDenominator("empty contingency table")
    row_sums = [sum(table[i]) for i in range(k)]
    col_sums = [sum(table[i][j] for i in range(k)) for j in range(k)]
    observed = 0
    expected = 0
    for i in range(k):
        for j in range(k):
            weight = (i - j) * (i - j)
            observed += weight * table[i][j] * n
            expected += weight * row_sums[i] * col_sums[j]
    if expected == 0:
        raise Degenerate("all expected weighted disagreement is zero")
    return float(1 - Fraction(observed, expected))


def cohens_kappa(pairs: list[RatedPair], item: RubricItem) -> float:
    """Cohen's kappa over the double-non-NA pairs of one item."""
    table, _ = _contingency(pairs, item, item.options)
    return kappa_from_table(table)


def weighted_kappa(
    pairs: list[RatedPair],
    item: RubricItem,
    ordering: tuple[str, ...] | None = None,
) -> float:
    """Quadratic-weighted kappa for an ordinal item."""
    if ordering is None:
        ordering = ORDINAL_ORDERINGS.get(item)
    if ordering is None:
        raise ValueError(f"{item.value} has no declared category ordering")
    table, _ = _contingency(pairs, item, ordering)
    return weighted_kappa_from_table(table)


@dataclass(frozen=True)
class AgreementCell:
    item: str
    n: int
    percent_agreement: float | None
    kappa: float | None
    kappa_kind: str  # "simple" | "quadratic"
    note: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "item": self.item,
            "n": self.n,
            "percent_agreement": self.percent_agreement,
            "kappa": self.kappa,
            "kappa_kind": self.kappa_kind,
            "note": self.note,
        }


def agreement_report(pairs: list[RatedPair]) -> list[AgreementCell]:
    """Per-item percent agreement plus the item-appropriate kappa."""
    cells = []
    for item in RubricItem:
        scored = _double_non_na(pairs, item)
        pct = percent_agreement(pairs, item)
        kind = "quadratic" if item in ORDINAL_ORDERINGS else "simple"
        value: float | None
        note = None
        try:
            if kind == "quadratic":
                value = weighted_kappa(pairs, item)
            else:
                value = cohens_kappa(pairs, item)
        except (EmptyDenominator, Degenerate) as exc:
            value = None
            note = f"{type(exc).__name__}: {exc}"
        cells.append(
            AgreementCell(
                item=item.value,
                n=len(scored),
                percent_agreement=pct,
                kappa=value,
                kappa_kind=kind,
                note=note,
            )
        )
    return cells


@dataclass(frozen=True)
class QualityCell:
    model_id: str | None
    strategy: str | None
    n: int
    high_quality: int
    quality_pct: float
    skill_matches: int
    skill_pct: float | None

    def to_json_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "strategy": self.strategy,
            "n": self.n,
            "high_quality": self.high_quality,
            "quality_pct": self.quality_pct,
            "skill_matches": self.skill_matches,
            "skill_pct": self.skill_pct,
        }


@dataclass
class QualityReport:
    policy: str
    cells: list[QualityCell]
    model_rows: list[QualityCell]
    overall: QualityCell

    def to_json_dict(self) -> dict:
        return {
            "policy": self.policy,
            "cells": [c.to_json_dict() for c in self.cells],
            "models": [c.to_json_dict() for c in self.model_rows],
            "overall": self.overall.to_json_dict(),
        }


def _policy_records(
    question_id: str,
    annotations: dict[str, AnnotationRecord],
    policy: str,
) -> list[AnnotationRecord] | None:
    """The records the policy demands for one question, or None when uncovered."""
    if policy == POLICY_BOTH_HUMANS:
        humans = [r for a, r in annotations.items() if a.startswith("human:")]
        return humans if len(humans) >= 2 else None
    if policy == POLICY_LLM:
        llms = [r for a, r in annotations.items() if a.startswith("llm:")]
        return llms if len(llms) == 1 else None
    if policy == POLICY_SINGLE:
        return list(annotations.values()) if len(annotations) == 1 else None
    raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def quality_metrics(
    questions: list[QuestionRecord],
    annotations: list[AnnotationRecord],
    policy: str = POLICY_BOTH_HUMANS,
    strict: bool = False,
    skill_requires_all: bool = True,
) -> QualityReport:
    """Quality% and Skill% per (model, strategy) cell, per model, and overall.

    A question is high quality only when every policy rater marks it high
    quality; Skill% is computed over the high-quality subset and, by default,
    requires every policy rater's Bloom label to match the prompted level.
    """
    by_question: dict[str, dict[str, AnnotationRecord]] = {}
    for record in annotations:
        by_question.setdefault(record.question_id, {})[record.annotator_id] = record

    uncovered = []
    verdicts: dict[str, tuple[bool, bool]] = {}  # question_id -> (hq, skill_match)
    for question in questions:
        selected = _policy_records(question.question_id, by_question.get(question.question_id, {}), policy)
        if selected is None:
            uncovered.append(question.question_id)
            continue
        hq = all(is_high_quality(r, strict=strict) for r in selected)
        matches = [skill_adheres(r, question.intended_level) for r in selected]
        skill = all(matches) if skill_requires_all else any(matches)
        verdicts[question.question_id] = (hq, skill)
    if uncovered:
        raise MissingAnnotations(uncovered)

    def cell(
        subset: list[QuestionRecord], model_id: str | None, strategy: str | None
    ) -> QualityCell:
        n = len(subset)
        hq_questions = [q for q in subset if verdicts[q.question_id][0]]
        skill_matches = sum(1 for q in hq_questions if verdicts[q.question_id][1])
        quality_pct = 100.0 * len(hq_questions) / n if n else 0.0
        skill_pct = 100.0 * skill_matches / len(hq_questions) if hq_questions else None
        return QualityCell(
            model_id=model_id,
            strategy=strategy,
            n=n,
            high_quality=len(hq_questions),
            quality_pct=quality_pct,
            skill_matches=skill_matches,
            skill_pct=skill_pct,
        )

    models = sorted({q.model_id for q in questions})
    strategies = sorted({q.strategy for q in questions}, key=lambda s: s.value)
    cells = [
        cell(
            [q for q in questions if q.model_id == m and q.strategy is s],
            m,
            s.value,
        )
        for m in models
        for s in strategies
        if any(q.model_id == m and q.strategy is s for q in questions)
    ]
    model_rows = [
        cell([q for q in questions if q.model_id == m], m, None) for m in models
    ]
    overall = cell(list(questions), None, None)
    return QualityReport(policy=policy, cells=cells, model_rows=model_rows, overall=overall)


# Recurring locale-specific themes; keywords are editable config, matched
# case-insensitively on word boundaries.
DEFAULT_THEME_LEXICON: dict[str, list[str]] = {
    "bollywood": ["bollywood", "film industry"],
    "traffic": ["traffic", "congestion"],
    "education": ["education system", "school", "university", "exam"],
    "agriculture": ["agriculture", "farmer", "farming", "farm"],
    "climate": ["climate", "monsoon", "rainfall"],
    "crop_yield": ["crop yield", "crop yields", "harvest"],
    "crop_diseases": ["crop disease", "crop diseases", "pest"],
    "cropping_patterns": ["cropping pattern", "cropping patterns", "sowing"],
    "indian_languages": [
        "hindi",
        "tamil",
        "telugu",
        "bengali",
        "marathi",
        "kannada",
        "malayalam",
        "indian language",
        "indian languages",
    ],
}


def theme_frequencies(
    questions: list[QuestionRecord],
    lexicon: dict[str, list[str]] | None = None,
) -> dict[str, dict[str, int]]:
    """Count questions touching each theme, per generator model.

    A question counts at most once per theme no matter how many of the
    theme's keywords it matches.
    """
    lexicon = lexicon if lexicon is not None else DEFAULT_THEME_LEXICON
    if not lexicon:
        raise ValueError("theme lexicon must be non-empty")
    compiled = {
        theme: [
            re.compile(r"\b" + re.escape(keyword.lower()) + r"\b")
            for keyword in keywords
        ]
        for theme, keywords in lexicon.items()
    }
    models = sorted({q.model_id for q in questions})
    counts: dict[str, Counter] = {theme: Counter() for theme in lexicon}
    for question in questions:
        text = question.text.lower()
        for theme, patterns in compiled.items():
            if any(p.search(text) for p in patterns):
                counts[theme][question.model_id] += 1
    return {
        theme: {model: counts[theme].get(model, 0) for model in models}
        for theme in sorted(lexicon)
    }


def simulate_independent_raters(
    n_pairs: int, categories: tuple[str, ...], seed: int
) -> list[RatedPair]:
    """Uniform, independent rating pairs for statistical sanity checks."""
    import random

    rng = random.Random(seed)
    return [
        RatedPair(
            question_id=f"sim{i}",
            item=RubricItem.BLOOMS_LEVEL,
            a=rng.choice(categories),
            b=rng.choice(categories),
        )
        for i in range(n_pairs)
    ]
