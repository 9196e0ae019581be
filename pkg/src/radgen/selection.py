"""Redundancy scoring and report assembly.

Each candidate sentence is scored by its mean CIDEr similarity against every
other candidate; the k lowest-scoring (most unique) survive. Document
frequencies come from the candidate set itself, one candidate per document,
so selection is a pure function of the candidates.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .agents import CandidateSentence
from .corpus import tokenize
from .labels import DiseaseCategory
from .metrics import cider_similarity, ngram_profile, reference_frequencies


@dataclass(frozen=True)
class SelectionConfig:
    k: int = 6
    ngram_max: int = 4
    sigma: float = 6.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 1 <= self.ngram_max <= 4:
            raise ValueError("ngram_max must lie in 1..4")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class ScoredSentence:
    category: DiseaseCategory
    text: str
    mean_cider: float

    def __post_init__(self):
        if self.mean_cider < 0:
            raise ValueError("mean_cider must be non-negative")


@dataclass(frozen=True)
class GeneratedReport:
    """The assembled report for one study, with per-sentence provenance."""

    study_id: str
    selected: tuple[ScoredSentence, ...]
    discarded: tuple[ScoredSentence, ...] = ()
    failures: tuple[DiseaseCategory, ...] = ()
    text: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(self.selected))
        object.__setattr__(self, "discarded", tuple(self.discarded))
        object.__setattr__(self, "failures", tuple(self.failures))
        object.__setattr__(self, "text", " ".join(s.text for s in self.selected))


def pairwise_cider_matrix(
    candidates: Sequence[CandidateSentence], config: SelectionConfig = SelectionConfig()
) -> list[list[float]]:
    """Square matrix of candidate-vs-candidate CIDEr scores, diagonal 0."""
    if len(candidates) < 2:
        raise ValueError("pairwise scoring needs at least 2 candidates")
    token_lists = [tokenize(c.text) for c in candidates]
    dfs = reference_frequencies([[t] for t in token_lists], config.ngram_max)
    profiles = [ngram_profile(t, config.ngram_max) for t in token_lists]
    matrix = []
    for i, hyp in enumerate(profiles):
        row = [
            0.0
            if i == j
            else cider_similarity(hyp, ref, dfs, config.ngram_max, config.sigma)
            for j, ref in enumerate(profiles)
        ]
        matrix.append(row)
    return matrix


def select_unique(
    candidates: Sequence[CandidateSentence], config: SelectionConfig = SelectionConfig()
) -> tuple[list[ScoredSentence], list[ScoredSentence]]:
    """Keep the k most unique candidates (lowest mean similarity to the rest).

    Ties break on canonical category order. When k covers every candidate no
    matrix is computed and all scores are 0. Returns (selected, discarded).
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if len(candidates) <= config.k:
        selected = [
            ScoredSentence(category=c.category, text=c.text, mean_cider=0.0)
            for c in candidates
        ]
        return selected, []
    matrix = pairwise_cider_matrix(candidates, config)
    n = len(candidates)
    scored = [
        ScoredSentence(
            category=c.category,
            text=c.text,
            mean_cider=sum(row[j] for j in range(n) if j != i) / (n - 1),
        )
        for i, (c, row) in enumerate(zip(candidates, matrix))
    ]
    order = sorted(range(n), key=lambda i: (scored[i].mean_cider, scored[i].category.order, i))
    keep = set(order[: config.k])
    selected = [scored[i] for i in order[: config.k]]
    discarded = [scored[i] for i in range(n) if i not in keep]
    return selected, discarded


def assemble_report(
    study_id: str,
    selected: Iterable[ScoredSentence],
    discarded: Iterable[ScoredSentence] = (),
    failures: Iterable[DiseaseCategory] = (),
) -> GeneratedReport:
    """Order the selected sentences canonically and join them into one text."""
    selected = sorted(selected, key=lambda s: s.category.order)
    if not selected:
        raise ValueError("cannot assemble a report from an empty selection")
    return GeneratedReport(
        study_id=study_id,
        selected=tuple(selected),
        discarded=tuple(discarded),
        failures=tuple(failures),
    )


def report_to_json(report: GeneratedReport) -> dict:
    """The JSONL line schema for generated reports."""
    return {
        "id": report.study_id,
        "report": report.text,
        "sentences": [
            {"category": s.category.value, "text": s.text, "mean_cider": s.mean_cider}
            for s in report.selected
        ],
        "failures": [c.value for c in report.failures],
    }


def report_json_line(report: GeneratedReport) -> str:
    return json.dumps(report_to_json(report), ensure_ascii=False)
