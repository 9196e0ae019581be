"""Sentence labeling: a deterministic rule-based engine and a remote client.

The rule-based labeler is the offline default and the test oracle: it scans
each sentence for per-category keyword phrases and applies negation and
uncertainty cues. The remote client speaks the labeling wire protocol
(POST /label) to any compatible service.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import _http
from .corpus import Sentence, tokenize
from .errors import ProtocolError
from .labels import (
    AGENT_CATEGORIES,
    DiseaseCategory,
    LabeledSentence,
    ObservationState,
    UncertainPolicy,
)

# A keyword is negated when one of these ends within the 4 tokens before it.
NEGATION_CUES = ("no", "without", "free of", "negative for", "clear of", "resolved")
NEGATION_WINDOW = 4

# Uncertainty cues fire anywhere in the sentence.
UNCERTAINTY_CUES = (
    "possible",
    "possibly",
    "may",
    "might",
    "cannot exclude",
    "suspected",
    "concerning for",
)


def default_lexicon() -> dict[str, list[str]]:
    """The lexicon shipped with the package: category name -> keyword phrases."""
    data = resources.files("radgen").joinpath("data/lexicon.json").read_text(encoding="utf-8")
    return json.loads(data)


def load_lexicon(path: str | Path) -> dict[str, list[str]]:
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)


class RuleBasedLabeler:
    """Pure keyword labeler; thread-safe, deterministic per sentence text."""

    def __init__(self, lexicon: Mapping[str, Sequence[str]] | None = None):
        lexicon = lexicon if lexicon is not None else default_lexicon()
        self._phrases: dict[DiseaseCategory, list[tuple[str, ...]]] = {}
        for name, phrases in lexicon.items():
            category = DiseaseCategory.from_name(name)
            self._phrases[category] = [tuple(tokenize(p)) for p in phrases]
        for category in AGENT_CATEGORIES:
            self._phrases.setdefault(category, [])
        self._normality = self._phrases.get(DiseaseCategory.NO_FINDING, [])
        self._negation = [tuple(tokenize(c)) for c in NEGATION_CUES]
        self._uncertainty = [tuple(tokenize(c)) for c in UNCERTAINTY_CUES]

    def label_text(self, text: str) -> dict[DiseaseCategory, ObservationState]:
        tokens = tokenize(text)
        states: dict[DiseaseCategory, ObservationState] = {}
        for category in AGENT_CATEGORIES:
            states[category] = self._category_state(tokens, self._phrases[category])
        all_unmentioned = all(s is ObservationState.UNMENTIONED for s in states.values())
        if all_unmentioned and _any_match(tokens, self._normality):
            states[DiseaseCategory.NO_FINDING] = ObservationState.POSITIVE
        else:
            states[DiseaseCategory.NO_FINDING] = ObservationState.UNMENTIONED
        return states

    def label_texts(self, texts: Sequence[str]) -> list[dict[DiseaseCategory, ObservationState]]:
        return [self.label_text(t) for t in texts]

    def _category_state(
        self, tokens: list[str], phrases: list[tuple[str, ...]]
    ) -> ObservationState:
        starts = [i for p in phrases if p for i in _find_phrase(tokens, p)]
        if not starts:
            return ObservationState.UNMENTIONED
        # precedence: negated beats uncertain beats positive
        if any(self._negated_at(tokens, i) for i in starts):
            return ObservationState.NEGATIVE
        if _any_match(tokens, self._uncertainty):
            return ObservationState.UNCERTAIN
        return ObservationState.POSITIVE

    def _negated_at(self, tokens: list[str], start: int) -> bool:
        window = tokens[max(0, start - NEGATION_WINDOW) : start]
        return _any_match(window, self._negation)


def _find_phrase(tokens: Sequence[str], phrase: tuple[str, ...]) -> list[int]:
    n = len(phrase)
    return [i for i in range(len(tokens) - n + 1) if tuple(tokens[i : i + n]) == phrase]


def _any_match(tokens: Sequence[str], phrases: Iterable[tuple[str, ...]]) -> bool:
    return any(p and _find_phrase(tokens, p) for p in phrases)


@dataclass(frozen=True)
class RemoteLabeler:
    """Client for a remote labeling service (POST {endpoint}/label)."""

    endpoint: str
    timeout_ms: int = 10_000
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")

    def label_texts(self, texts: Sequence[str]) -> list[dict[DiseaseCategory, ObservationState]]:
        if not texts:
            return []
        url = self.endpoint.rstrip("/") + "/label"
        body, _, _ = _http.post_json(
            url,
            {"sentences": list(texts)},
            timeout_ms=self.timeout_ms,
            max_retries=self.max_retries,
        )
        labels = body.get("labels")
        if not isinstance(labels, list) or len(labels) != len(texts):
            raise ProtocolError(
                f"labeler response must carry {len(texts)} entries under 'labels'"
            )
        return [self._parse_entry(entry, i) for i, entry in enumerate(labels)]

    @staticmethod
    def _parse_entry(entry: object, index: int) -> dict[DiseaseCategory, ObservationState]:
        if not isinstance(entry, dict):
            raise ProtocolError(f"labels[{index}] is not an object")
        states: dict[DiseaseCategory, ObservationState] = {}
        for category in DiseaseCategory:
            if category.value not in entry:
                raise ProtocolError(f"labels[{index}] missing category {category.value!r}")
            raw = entry[category.value]
            try:
                states[category] = ObservationState.from_name(raw)
            except (ValueError, AttributeError):
                raise ProtocolError(
                    f"labels[{index}].{category.value!r} has invalid state {raw!r}"
                ) from None
        return states


LabelerBackend = RuleBasedLabeler | RemoteLabeler


def label_batch(backend: LabelerBackend, sentences: Sequence[Sentence]) -> list[LabeledSentence]:
    """Label sentences in order; one LabeledSentence per input.

    Rule-based labeling is pure; the remote path issues a single batched
    request and validates that every entry covers all 14 categories.
    """
    if not sentences:
        return []
    state_maps = backend.label_texts([s.text for s in sentences])
    out: list[LabeledSentence] = []
    for sentence, states in zip(sentences, state_maps):
        try:
            out.append(LabeledSentence(sentence=sentence, states=states))
        except ValueError as exc:
            if isinstance(backend, RemoteLabeler):
                raise ProtocolError(f"remote label for {sentence.text!r}: {exc}") from exc
            raise
    return out


def report_label_vector(
    labeled: Sequence[LabeledSentence],
    uncertain_policy: UncertainPolicy = UncertainPolicy.AS_POSITIVE,
) -> dict[DiseaseCategory, bool]:
    """Reduce one study's sentence labels to a report-level binary vector.

    A category is true when any sentence asserts it (Positive, or Uncertain
    under AS_POSITIVE). No Finding is derived: true iff the other 13 are all
    false.
    """
    study_ids = {ls.sentence.study_id for ls in labeled}
    if len(study_ids) > 1:
        raise ValueError(f"sentences span multiple studies: {sorted(study_ids)}")
    hit = {ObservationState.POSITIVE}
    if uncertain_policy is UncertainPolicy.AS_POSITIVE:
        hit.add(ObservationState.UNCERTAIN)
    vector = {
        category: any(ls.state(category) in hit for ls in labeled)
        for category in AGENT_CATEGORIES
    }
    vector[DiseaseCategory.NO_FINDING] = not any(vector[c] for c in AGENT_CATEGORIES)
    return vector
