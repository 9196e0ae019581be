"""Report corpora: JSONL ingestion, sentence splitting, and tokenization.

Everything here is pure and stateless; `Study` and `Sentence` values are
frozen and safe to share between threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import CorpusError

SPLITS = ("train", "validation", "test")

# Dots after these words never end a sentence. "no." is special-cased below:
# it only protects the dot when a digit follows ("image no. 2").
_ABBREVIATIONS = {"dr.", "mr.", "mrs.", "ms.", "st.", "e.g.", "i.e.", "vs.", "fig."}
_TERMINATORS = ".!?"

# Characters treated as token separators; hyphens survive so "x-ray" stays
# one token.
_PUNCT_TABLE = str.maketrans({c: " " for c in '.,;:!?()"\''})


@dataclass(frozen=True)
class Study:
    """One imaging study: a report plus opaque references to its images."""

    id: str
    split: str
    report_text: str
    image_refs: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("study id must be non-empty")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if not self.report_text:
            raise ValueError(f"study {self.id!r} has an empty report")
        object.__setattr__(self, "image_refs", tuple(self.image_refs))


@dataclass(frozen=True)
class Sentence:
    """One sentence of a study's report, positioned by a 0-based index."""

    study_id: str
    index: int
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("sentence text must be non-empty after trimming")
        if self.index < 0:
            raise ValueError("sentence index must be >= 0")


def load_corpus(path: str | Path, format: str = "jsonl") -> list[Study]:
    """Read all studies from a JSONL corpus file, preserving file order.

    Each line is an object with keys ``id``, ``split``, ``report`` and
    ``images``. Blank lines are ignored. Raises `CorpusError` with the
    1-based line number for malformed lines and duplicate ids; an empty file
    yields an empty list.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    path = Path(path)
    studies: list[Study] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON: {exc.msg}", line=lineno, path=str(path)) from exc
            if not isinstance(record, dict):
                raise CorpusError("line is not a JSON object", line=lineno, path=str(path))
            try:
                study = Study(
                    id=_expect_str(record, "id"),
                    split=_expect_str(record, "split"),
                    report_text=_expect_str(record, "report"),
                    image_refs=tuple(_expect_str_list(record, "images")),
                )
            except ValueError as exc:
                raise CorpusError(str(exc), line=lineno, path=str(path)) from exc
            if study.id in seen:
                raise CorpusError(f"duplicate study id {study.id!r}", line=lineno, path=str(path))
            seen.add(study.id)
            studies.append(study)
    return studies


def _expect_str(record: dict, key: str) -> str:
    value = record.get(key)
    if not isinstance(value, str):
        raise ValueError(f"missing or non-string field {key!r}")
    return value


def _expect_str_list(record: dict, key: str) -> list[str]:
    value = record.get(key)
    if value is None:
        return []
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"field {key!r} must be an array of strings")
    return value


def split_sentences(report_text: str) -> list[str]:
    """Split a report into trimmed sentences, keeping terminators.

    A sentence ends at a run of ``. ! ?`` followed by whitespace or the end
    of the text, except after a known abbreviation ("Dr.", "e.g.", ...) or
    "no." when a digit follows. Every non-whitespace character of the input
    lands in exactly one output sentence.
    """
    if not report_text:
        raise ValueError("report_text must be non-empty")
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(report_text)
    while i < n:
        if report_text[i] not in _TERMINATORS:
            i += 1
            continue
        # absorb a terminator run ("...", "?!") as one boundary candidate
        j = i
        while j + 1 < n and report_text[j + 1] in _TERMINATORS:
            j += 1
        at_end = j + 1 >= n
        if not at_end and not report_text[j + 1].isspace():
            i = j + 1
            continue
        if j == i and report_text[i] == "." and _is_abbreviation(report_text, i, j):
            i = j + 1
            continue
        chunk = report_text[start : j + 1].strip()
        if chunk:
            sentences.append(chunk)
        start = j + 1
        i = j + 1
    tail = report_text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _is_abbreviation(text: str, dot: int, run_end: int) -> bool:
    wstart = dot
    while wstart > 0 and not text[wstart - 1].isspace():
        wstart -= 1
    word = text[wstart : dot + 1].lower().lstrip("(\"'[")
    if word in _ABBREVIATIONS:
        return True
    if word == "no.":
        k = run_end + 1
        while k < len(text) and text[k].isspace():
            k += 1
        return k < len(text) and text[k].isdigit()
    return False


def sentences_for_study(study: Study) -> list[Sentence]:
    """Split a study's report and wrap each sentence with its ordinal."""
    return [
        Sentence(study_id=study.id, index=i, text=t)
        for i, t in enumerate(split_sentences(study.report_text))
    ]


def tokenize(text: str) -> list[str]:
    """Lowercase, strip sentence punctuation to spaces, split on whitespace.

    Pure function; may return an empty list.
    """
    return text.lower().translate(_PUNCT_TABLE).split()


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def iter_all_sentences(studies: Iterable[Study]) -> list[Sentence]:
    """Flatten sentence records for a batch of studies, in corpus order."""
    out: list[Sentence] = []
    for study in studies:
        out.extend(sentences_for_study(study))
    return out
