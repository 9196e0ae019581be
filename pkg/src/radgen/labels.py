"""Observation categories and per-sentence label states."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

from .corpus import Sentence


class DiseaseCategory(enum.Enum):
    """The 14 observation classes, in canonical (distribution table) order.

    "No Finding" is exclusive and has no dedicated agent; the other 13 are
    agent-bearing.
    """

    ENLARGED_CARDIOMEDIASTINUM = "Enlarged Cardiomediastinum"
    CARDIOMEGALY = "Cardiomegaly"
    LUNG_OPACITY = "Lung Opacity"
    LUNG_LESION = "Lung Lesion"
    EDEMA = "Edema"
    CONSOLIDATION = "Consolidation"
    PNEUMONIA = "Pneumonia"
    ATELECTASIS = "Atelectasis"
    PNEUMOTHORAX = "Pneumothorax"
    PLEURAL_EFFUSION = "Pleural Effusion"
    PLEURAL_OTHER = "Pleural Other"
    FRACTURE = "Fracture"
    SUPPORT_DEVICES = "Support Devices"
    NO_FINDING = "No Finding"

    @property
    def has_agent(self) -> bool:
        return self is not DiseaseCategory.NO_FINDING

    @property
    def slug(self) -> str:
        return self.value.lower().replace(" ", "_")

    @property
    def order(self) -> int:
        return _CANONICAL_INDEX[self]

    @classmethod
    def from_name(cls, name: str) -> "DiseaseCategory":
        """Resolve a wire name ("Pleural Effusion") or slug ("pleural_effusion")."""
        key = name.strip().lower().replace("_", " ")
        try:
            return _BY_LOWER_NAME[key]
        except KeyError:
            raise ValueError(f"unknown disease category {name!r}") from None


_CANONICAL_INDEX = {c: i for i, c in enumerate(DiseaseCategory)}
_BY_LOWER_NAME = {c.value.lower(): c for c in DiseaseCategory}

AGENT_CATEGORIES: tuple[DiseaseCategory, ...] = tuple(
    c for c in DiseaseCategory if c.has_agent
)


class ObservationState(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNCERTAIN = "uncertain"
    UNMENTIONED = "unmentioned"

    @classmethod
    def from_name(cls, name: str) -> "ObservationState":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown observation state {name!r}") from None


class UncertainPolicy(enum.Enum):
    """How Uncertain sentence states map into report-level binary labels."""

    AS_POSITIVE = "as_positive"
    AS_NEGATIVE = "as_negative"


@dataclass(frozen=True)
class LabeledSentence:
    """A sentence plus a total state map over all 14 categories.

    Enforces totality and the No-Finding exclusivity invariant: a sentence
    positively asserting normality cannot also positively assert a disease.
    """

    sentence: Sentence
    states: Mapping[DiseaseCategory, ObservationState] = field(hash=False)

    def __post_init__(self):
        states = dict(self.states)
        missing = [c.value for c in DiseaseCategory if c not in states]
        if missing:
            raise ValueError(f"state map missing categories: {', '.join(missing)}")
        extra = set(states) - set(DiseaseCategory)
        if extra:
            raise ValueError(f"state map has unknown keys: {extra!r}")
        if states[DiseaseCategory.NO_FINDING] is ObservationState.POSITIVE:
            offending = [
                c.value
                for c in AGENT_CATEGORIES
                if states[c] in (ObservationState.POSITIVE, ObservationState.UNCERTAIN)
            ]
            if offending:
                raise ValueError(
                    "No Finding is positive but these categories are asserted: "
                    + ", ".join(offending)
                )
        object.__setattr__(self, "states", states)

    def state(self, category: DiseaseCategory) -> ObservationState:
        return self.states[category]
