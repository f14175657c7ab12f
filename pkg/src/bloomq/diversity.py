"""N-gram novelty (PINC) scoring over generated question sets.

For a source sentence s and candidate c the score averages, over n-gram
orders 1..N, the fraction of the candidate's distinct n-grams absent from the
source:

    PINC(s, c) = (1/N) * sum_n (1 - |ngrams_n(s) & ngrams_n(c)| / |ngrams_n(c)|)

Orders where the candidate is too short to have any n-grams are skipped and
the divisor reduced. Questions are grouped per (model, strategy, level) and
every ordered pair inside a group is scored; higher means more lexical
novelty across a model's questions for one skill.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from fractions import Fraction

from .model import QuestionRecord


class EmptyCandidate(Exception):
    pass


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation per token."""
    tokens = []
    for chunk in text.lower().split():
        start, end = 0, len(chunk)
        while start < end and _is_punctuation(chunk[start]):
            start += 1
        while end > start and _is_punctuation(chunk[end - 1]):
            end -= 1
        token = chunk[start:end]
        if token:
            tokens.append(token)
    return tokens


def _ngram_set(tokens: list[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def pinc(source: list[str], candidate: list[str], n_max: int = 4) -> float:
    """PINC score of ``candidate`` against ``source`` over orders 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not candidate:
        raise EmptyCandidate("candidate has no tokens")
    # Exact rational accumulation so textbook fixtures come out exact.
    total = Fraction(0)
    orders = 0
    for n in range(1, n_max + 1):
        cand_grams = _ngram_set(candidate, n)
        if not cand_grams:
            continue
        src_grams = _ngram_set(source, n)
        total += 1 - Fraction(len(cand_grams & src_grams), len(cand_grams))
        orders += 1
    return float(total / orders)


@dataclass(frozen=True)
class GroupScore:
    model_id: str
    strategy: str
    level: str
    n_pairs: int
    mean_pinc: float

    def to_json_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "strategy": self.strategy,
            "level": self.level,
            "n_pairs": self.n_pairs,
            "mean_pinc": self.mean_pinc,
        }


@dataclass
class DiversityReport:
    n_max: int
    groups: list[GroupScore]
    model_strategy: dict[tuple[str, str], float]
    models: dict[str, float]
    overall: float | None

    def to_json_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "groups": [g.to_json_dict() for g in self.groups],
            "model_strategy": [
                {"model_id": m, "strategy": s, "mean_pinc": v}
                for (m, s), v in sorted(self.model_strategy.items())
            ],
            "models": [
                {"model_id": m, "mean_pinc": v} for m, v in sorted(self.models.items())
            ],
            "overall": self.overall,
        }


GROUP_FIELDS = ("model", "strategy", "level")


def group_pinc_by(
    questions: list[QuestionRecord],
    n_max: int = 4,
    fields: tuple[str, ...] = GROUP_FIELDS,
) -> dict[tuple[str, ...], tuple[int, float]]:
    """Mean pairwise PINC per group keyed by the chosen fields.

    Returns {key: (n_pairs, mean)}; groups without pairs are omitted.
    """
    unknown = [f for f in fields if f not in GROUP_FIELDS]
    if unknown:
        raise ValueError(f"unknown group fields: {unknown}")

    def key_of(q: QuestionRecord) -> tuple[str, ...]:
        parts = {
            "model": q.model_id,
            "strategy": q.strategy.value,
            "level": q.intended_level.level_name,
        }
        return tuple(parts[f] for f in fields)

    grouped: dict[tuple[str, ...], list[list[str]]] = {}
    for question in questions:
        grouped.setdefault(key_of(question), []).append(tokenize(question.text))
    out: dict[tuple[str, ...], tuple[int, float]] = {}
    for key in sorted(grouped):
        token_lists = grouped[key]
        scores = [
            pinc(source, candidate, n_max)
            for i, source in enumerate(token_lists)
            for j, candidate in enumerate(token_lists)
            if i != j and candidate
        ]
        if scores:
            out[key] = (len(scores), sum(scores) / len(scores))
    return out


def group_pinc(questions: list[QuestionRecord], n_max: int = 4) -> DiversityReport:
    """Mean pairwise PINC per (model, strategy, level), rolled up hierarchically.

    Each group scores all ordered pairs (source != candidate); singleton groups
    contribute no pairs and are omitted. Group means average into per-strategy
    means, those into per-model means, and those into the overall mean.
    """
    grouped: dict[tuple[str, str, str], list[list[str]]] = {}
    for question in questions:
        key = (question.model_id, question.strategy.value, question.intended_level.level_name)
        grouped.setdefault(key, []).append(tokenize(question.text))

    groups: list[GroupScore] = []
    for key in sorted(grouped):
        token_lists = grouped[key]
        scores = []
        for i, source in enumerate(token_lists):
            for j, candidate in enumerate(token_lists):
                if i == j or not candidate:
                    continue
                scores.append(pinc(source, candidate, n_max))
        if not scores:
            continue
        groups.append(
            GroupScore(
                model_id=key[0],
                strategy=key[1],
                level=key[2],
                n_pairs=len(scores),
                mean_pinc=sum(scores) / len(scores),
            )
        )

    by_model_strategy: dict[tuple[str, str], list[float]] = {}
    for group in groups:
        by_model_strategy.setdefault((group.model_id, group.strategy), []).append(
            group.mean_pinc
        )
    model_strategy = {
        key: sum(values) / len(values) for key, values in by_model_strategy.items()
    }

    by_model: dict[str, list[float]] = {}
    for (model_id, _), value in model_strategy.items():
        by_model.setdefault(model_id, []).append(value)
    models = {m: sum(v) / len(v) for m, v in by_model.items()}

    overall = sum(models.values()) / len(models) if models else None
    return DiversityReport(
        n_max=n_max,
        groups=groups,
        model_strategy=model_strategy,
        models=models,
        overall=overall,
    )
