"""Per-disease training subsets and sentence-distribution statistics."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import SPLITS, Study
from .labels import AGENT_CATEGORIES, DiseaseCategory, LabeledSentence, ObservationState

_TRAINABLE = (ObservationState.POSITIVE, ObservationState.NEGATIVE)


@dataclass(frozen=True)
class SubsetEntry:
    """One training example for one disease-specialized agent."""

    study_id: str
    image_refs: tuple[str, ...]
    category: DiseaseCategory
    sentence_text: str
    state: ObservationState

    def __post_init__(self):
        if self.state not in _TRAINABLE:
            raise ValueError("subset entries carry positive or negative states only")
        if not self.category.has_agent:
            raise ValueError("No Finding has no training subset")
        object.__setattr__(self, "image_refs", tuple(self.image_refs))


@dataclass(frozen=True)
class DistributionTable:
    """Counts of positive/negative sentences per (category, split)."""

    counts: Mapping[tuple[DiseaseCategory, str], int]

    def __post_init__(self):
        counts = dict(self.counts)
        for category in DiseaseCategory:
            for split in SPLITS:
                counts.setdefault((category, split), 0)
        if any(v < 0 for v in counts.values()):
            raise ValueError("distribution counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    def get(self, category: DiseaseCategory, split: str) -> int:
        return self.counts[(category, split)]

    def total(self, category: DiseaseCategory) -> int:
        return sum(self.counts[(category, s)] for s in SPLITS)

    def to_json(self) -> dict:
        return {
            c.value: {s: self.counts[(c, s)] for s in SPLITS} for c in DiseaseCategory
        }

    def format_table(self) -> str:
        width = max(len(c.value) for c in DiseaseCategory)
        header = f"{'category':<{width}}  " + "  ".join(f"{s:>10}" for s in SPLITS)
        lines = [header, "-" * len(header)]
        for c in DiseaseCategory:
            cells = "  ".join(f"{self.counts[(c, s)]:>10}" for s in SPLITS)
            lines.append(f"{c.value:<{width}}  {cells}")
        return "\n".join(lines)


def _study_index(studies: Sequence[Study], labeled: Sequence[LabeledSentence]) -> dict[str, Study]:
    by_id = {s.id: s for s in studies}
    for ls in labeled:
        if ls.sentence.study_id not in by_id:
            raise ValueError(f"labeled sentence references unknown study {ls.sentence.study_id!r}")
    return by_id


def build_subsets(
    studies: Sequence[Study],
    labeled: Sequence[LabeledSentence],
    *,
    uncertain_as_positive: bool = False,
) -> dict[DiseaseCategory, list[SubsetEntry]]:
    """Group positively/negatively labeled sentences into per-agent subsets.

    A sentence enters the subset of every category it asserts or denies, so
    one sentence can feed several agents. Unmentioned and (by default)
    Uncertain states contribute nothing; No Finding never forms a subset.
    Entries keep input order.
    """
    by_id = _study_index(studies, labeled)
    subsets: dict[DiseaseCategory, list[SubsetEntry]] = {c: [] for c in AGENT_CATEGORIES}
    for ls in labeled:
        study = by_id[ls.sentence.study_id]
        for category in AGENT_CATEGORIES:
            state = ls.state(category)
            if state is ObservationState.UNCERTAIN and uncertain_as_positive:
                state = ObservationState.POSITIVE
            if state in _TRAINABLE:
                subsets[category].append(
                    SubsetEntry(
                        study_id=study.id,
                        image_refs=study.image_refs,
                        category=category,
                        sentence_text=ls.sentence.text,
                        state=state,
                    )
                )
    return subsets


def distribution_stats(
    labeled: Sequence[LabeledSentence], studies: Sequence[Study]
) -> DistributionTable:
    """Count positive/negative sentences per category and corpus split.

    Permutation-invariant over the labeled list; covers all 14 categories
    including No Finding.
    """
    by_id = _study_index(studies, labeled)
    counts: dict[tuple[DiseaseCategory, str], int] = {}
    for ls in labeled:
        split = by_id[ls.sentence.study_id].split
        for category in DiseaseCategory:
            if ls.state(category) in _TRAINABLE:
                key = (category, split)
                counts[key] = counts.get(key, 0) + 1
    return DistributionTable(counts=counts)


def subset_filename(category: DiseaseCategory) -> str:
    return f"subset_{category.slug}.jsonl"


def write_subsets(
    subsets: Mapping[DiseaseCategory, Iterable[SubsetEntry]], out_dir: str | Path
) -> list[Path]:
    """Write one JSONL training file per category; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for category in AGENT_CATEGORIES:
        path = out_dir / subset_filename(category)
        with path.open("w", encoding="utf-8") as fh:
            for entry in subsets.get(category, []):
                fh.write(
                    json.dumps(
                        {
                            "id": entry.study_id,
                            "images": list(entry.image_refs),
                            "target": entry.sentence_text,
                            "state": entry.state.value,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        written.append(path)
    return written
