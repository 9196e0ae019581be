"""Report-level evaluation: NLG metrics and clinical-efficacy scoring.

CIDEr-D: per n-gram order 1..4, clipped TF-IDF cosine between hypothesis and
reference, Gaussian length penalty exp(-(len_h - len_r)^2 / (2 sigma^2)),
mean over orders, scaled by 10, averaged over references then pairs. IDF is
log(corpus_size / max(df, 1)) with document frequencies counted once per
study over the reference documents.

ROUGE-L: token-level LCS F-measure, F = (1+b^2)RP / (R + b^2 P), max over
references, mean over pairs.

METEOR: exact + Porter-stem unigram alignment, Fmean = PR/(aP + (1-a)R),
fragmentation penalty g*(chunks/matches)^b, score = Fmean*(1 - penalty).
No synonym or paraphrase tables; the stem stage runs over tokens the exact
stage left unmatched.

All scoring is pure and thread-safe; document frequencies are computed once
per call and shared read-only.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import stemming
from .corpus import Sentence, split_sentences, tokenize
from .labels import (
    AGENT_CATEGORIES,
    DiseaseCategory,
    UncertainPolicy,
)
from .labeler import LabelerBackend, label_batch, report_label_vector


@dataclass(frozen=True)
class EvaluationPair:
    """One study's generated report against its reference report(s)."""

    study_id: str
    hypothesis: str
    references: tuple[str, ...]

    def __post_init__(self):
        if not self.study_id:
            raise ValueError("study_id must be non-empty")
        refs = tuple(self.references)
        if not refs:
            raise ValueError(f"pair {self.study_id!r} has no references")
        object.__setattr__(self, "references", refs)


@dataclass(frozen=True)
class DiseaseOutcome:
    accuracy: float
    recall: float | None  # None when the category has no positive truths


@dataclass(frozen=True)
class EvaluationReport:
    cider: float
    rouge_l: float
    meteor: float
    ce_precision: float
    ce_recall: float
    ce_f1: float
    per_disease: Mapping[DiseaseCategory, DiseaseOutcome] = field(hash=False)


# ---------------------------------------------------------------------------
# n-gram machinery (also drives the redundancy-selection kernel)


@dataclass(frozen=True)
class NgramProfile:
    """Raw n-gram counts for one text, orders 1..ngram_max."""

    counts: tuple[Counter, ...] = field(hash=False)
    length: int


def ngram_profile(tokens: Sequence[str], ngram_max: int = 4) -> NgramProfile:
    counts = tuple(
        Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
        for n in range(1, ngram_max + 1)
    )
    return NgramProfile(counts=counts, length=len(tokens))


@dataclass(frozen=True)
class DocumentFrequencies:
    """How many corpus documents contain each n-gram, plus the corpus size."""

    df: Mapping[tuple[str, ...], int] = field(hash=False)
    corpus_size: int

    def idf(self, gram: tuple[str, ...]) -> float:
        return math.log(self.corpus_size / max(self.df.get(gram, 0), 1))


def reference_frequencies(
    token_docs: Sequence[Sequence[Sequence[str]]], ngram_max: int = 4
) -> DocumentFrequencies:
    """Count document frequencies; each document's n-grams count once."""
    df: dict[tuple[str, ...], int] = {}
    for doc in token_docs:
        grams: set[tuple[str, ...]] = set()
        for tokens in doc:
            for n in range(1, ngram_max + 1):
                for i in range(len(tokens) - n + 1):
                    grams.add(tuple(tokens[i : i + n]))
        for gram in grams:
            df[gram] = df.get(gram, 0) + 1
    return DocumentFrequencies(df=df, corpus_size=len(token_docs))


def cider_similarity(
    hyp: NgramProfile,
    ref: NgramProfile,
    dfs: DocumentFrequencies,
    ngram_max: int = 4,
    sigma: float = 6.0,
) -> float:
    """Clipped TF-IDF cosine of one hypothesis against one reference, 0..10.

    The cosine of a zero vector against anything is 0 by definition, which
    covers both empty texts and all-idf-zero n-grams.
    """
    total = 0.0
    for n in range(ngram_max):
        h = hyp.counts[n]
        r = ref.counts[n]
        h_norm = math.sqrt(sum((c * dfs.idf(g)) ** 2 for g, c in h.items()))
        r_norm = math.sqrt(sum((c * dfs.idf(g)) ** 2 for g, c in r.items()))
        if h_norm == 0.0 or r_norm == 0.0:
            continue
        dot = 0.0
        for gram, h_count in h.items():
            r_count = r.get(gram)
            if r_count:
                dot += min(h_count, r_count) * r_count * dfs.idf(gram) ** 2
        total += dot / (h_norm * r_norm)
    delta = hyp.length - ref.length
    penalty = math.exp(-(delta * delta) / (2.0 * sigma * sigma))
    return (total / ngram_max) * penalty * 10.0


def _require_pairs(pairs: Sequence[EvaluationPair]) -> None:
    if not pairs:
        raise ValueError("need at least one evaluation pair")


def cider(pairs: Sequence[EvaluationPair], ngram_max: int = 4, sigma: float = 6.0) -> float:
    _require_pairs(pairs)
    ref_token_docs = [[tokenize(r) for r in pair.references] for pair in pairs]
    dfs = reference_frequencies(ref_token_docs, ngram_max)
    total = 0.0
    for pair, ref_docs in zip(pairs, ref_token_docs):
        hyp_profile = ngram_profile(tokenize(pair.hypothesis), ngram_max)
        ref_scores = [
            cider_similarity(hyp_profile, ngram_profile(rt, ngram_max), dfs, ngram_max, sigma)
            for rt in ref_docs
        ]
        total += sum(ref_scores) / len(ref_scores)
    return total / len(pairs)


# ---------------------------------------------------------------------------
# ROUGE-L


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence (classic two-row DP)."""
    if not a or not b:
        return 0
    width = len(b)
    prev = [0] * (width + 1)
    curr = [0] * (width + 1)
    for x in a:
        for j in range(1, width + 1):
            if x == b[j - 1]:
                curr[j] = prev[j - 1] + 1
            else:
                up, left = prev[j], curr[j - 1]
                curr[j] = up if up >= left else left
        prev, curr = curr, prev
    return prev[width]


def rouge_f(hyp_tokens: Sequence[str], ref_tokens: Sequence[str], beta: float = 1.2) -> float:
    lcs = lcs_length(hyp_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref_tokens)
    precision = lcs / len(hyp_tokens)
    b2 = beta * beta
    return (1 + b2) * recall * precision / (recall + b2 * precision)


def rouge_l(pairs: Sequence[EvaluationPair], beta: float = 1.2) -> float:
    _require_pairs(pairs)
    total = 0.0
    for pair in pairs:
        hyp = tokenize(pair.hypothesis)
        total += max(rouge_f(hyp, tokenize(ref), beta) for ref in pair.references)
    return total / len(pairs)


# ---------------------------------------------------------------------------
# METEOR


def _align(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> list[tuple[int, int]]:
    """Two-stage unigram alignment: exact matches, then Porter-stem matches
    over whatever remains. Greedy leftmost pairing within each stage."""
    hyp_free = [True] * len(hyp_tokens)
    ref_free = [True] * len(ref_tokens)
    matches: list[tuple[int, int]] = []
    for key in (lambda t: t, stemming.stem):
        ref_keys = [key(t) if free else None for t, free in zip(ref_tokens, ref_free)]
        for i, token in enumerate(hyp_tokens):
            if not hyp_free[i]:
                continue
            wanted = key(token)
            for j, ref_key in enumerate(ref_keys):
                if ref_free[j] and ref_key == wanted:
                    matches.append((i, j))
                    hyp_free[i] = False
                    ref_free[j] = False
                    break
    matches.sort()
    return matches


def _chunk_count(matches: list[tuple[int, int]]) -> int:
    chunks = 0
    prev: tuple[int, int] | None = None
    for hi, rj in matches:
        if prev is None or hi != prev[0] + 1 or rj != prev[1] + 1:
            chunks += 1
        prev = (hi, rj)
    return chunks


def meteor_pair(
    hyp_tokens: Sequence[str],
    ref_tokens: Sequence[str],
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
) -> float:
    if not hyp_tokens or not ref_tokens:
        return 0.0
    matches = _align(hyp_tokens, ref_tokens)
    m = len(matches)
    if m == 0:
        return 0.0
    precision = m / len(hyp_tokens)
    recall = m / len(ref_tokens)
    fmean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    penalty = gamma * (_chunk_count(matches) / m) ** beta
    return fmean * (1 - penalty)


def meteor(
    pairs: Sequence[EvaluationPair],
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
) -> float:
    _require_pairs(pairs)
    total = 0.0
    for pair in pairs:
        hyp = tokenize(pair.hypothesis)
        total += max(
            meteor_pair(hyp, tokenize(ref), alpha, beta, gamma) for ref in pair.references
        )
    return total / len(pairs)


# ---------------------------------------------------------------------------
# Clinical efficacy


def _split_or_empty(text: str) -> list[str]:
    return split_sentences(text) if text.strip() else []


def _label_vectors(
    pairs: Sequence[EvaluationPair],
    backend: LabelerBackend,
    uncertain_policy: UncertainPolicy,
) -> list[tuple[dict[DiseaseCategory, bool], dict[DiseaseCategory, bool]]]:
    """Per pair: (truth vector from references, predicted vector from the
    hypothesis). One batched labeler call covers every sentence."""
    sentences: list[Sentence] = []
    spans: list[tuple[int, int, int]] = []  # (hyp_start, ref_start, end)
    for pair in pairs:
        hyp_start = len(sentences)
        for i, text in enumerate(_split_or_empty(pair.hypothesis)):
            sentences.append(Sentence(study_id=pair.study_id, index=i, text=text))
        ref_start = len(sentences)
        index = 0
        for ref in pair.references:
            for text in _split_or_empty(ref):
                sentences.append(Sentence(study_id=pair.study_id, index=index, text=text))
                index += 1
        spans.append((hyp_start, ref_start, len(sentences)))
    labeled = label_batch(backend, sentences)
    vectors = []
    for (hyp_start, ref_start, end), pair in zip(spans, pairs):
        predicted = report_label_vector(labeled[hyp_start:ref_start], uncertain_policy)
        truth = report_label_vector(labeled[ref_start:end], uncertain_policy)
        vectors.append((truth, predicted))
    return vectors


def _micro_counts(
    vectors: Sequence[tuple[dict[DiseaseCategory, bool], dict[DiseaseCategory, bool]]],
) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for truth, predicted in vectors:
        for category in AGENT_CATEGORIES:  # No Finding is derived; not pooled
            t, p = truth[category], predicted[category]
            if p and t:
                tp += 1
            elif p:
                fp += 1
            elif t:
                fn += 1
    return tp, fp, fn


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision > 0 and recall > 0 else 0.0
    return precision, recall, f1


def ce_metrics(
    pairs: Sequence[EvaluationPair],
    backend: LabelerBackend,
    uncertain_policy: UncertainPolicy = UncertainPolicy.AS_POSITIVE,
) -> tuple[float, float, float]:
    """Micro-averaged precision/recall/F1 over the 13 agent-bearing
    categories, pooling TP/FP/FN across all pairs."""
    _require_pairs(pairs)
    vectors = _label_vectors(pairs, backend, uncertain_policy)
    return _prf(*_micro_counts(vectors))


def _per_disease(
    vectors: Sequence[tuple[dict[DiseaseCategory, bool], dict[DiseaseCategory, bool]]],
) -> dict[DiseaseCategory, DiseaseOutcome]:
    out: dict[DiseaseCategory, DiseaseOutcome] = {}
    n = len(vectors)
    for category in DiseaseCategory:
        agree = sum(1 for t, p in vectors if t[category] == p[category])
        positives = sum(1 for t, _ in vectors if t[category])
        if positives:
            tp = sum(1 for t, p in vectors if t[category] and p[category])
            recall = tp / positives
        else:
            recall = None
        out[category] = DiseaseOutcome(accuracy=agree / n, recall=recall)
    return out


def per_disease_eval(
    pairs: Sequence[EvaluationPair],
    backend: LabelerBackend,
    uncertain_policy: UncertainPolicy = UncertainPolicy.AS_POSITIVE,
) -> dict[DiseaseCategory, DiseaseOutcome]:
    """Per-category agreement accuracy and recall (None when the category
    never occurs positively in the truths)."""
    _require_pairs(pairs)
    return _per_disease(_label_vectors(pairs, backend, uncertain_policy))


def evaluate_pairs(
    pairs: Sequence[EvaluationPair],
    backend: LabelerBackend,
    uncertain_policy: UncertainPolicy = UncertainPolicy.AS_POSITIVE,
    *,
    ngram_max: int = 4,
    sigma: float = 6.0,
    rouge_beta: float = 1.2,
    meteor_alpha: float = 0.9,
    meteor_beta: float = 3.0,
    meteor_gamma: float = 0.5,
) -> EvaluationReport:
    """Run the full metric battery over generated-vs-reference pairs."""
    _require_pairs(pairs)
    vectors = _label_vectors(pairs, backend, uncertain_policy)
    precision, recall, f1 = _prf(*_micro_counts(vectors))
    return EvaluationReport(
        cider=cider(pairs, ngram_max, sigma),
        rouge_l=rouge_l(pairs, rouge_beta),
        meteor=meteor(pairs, meteor_alpha, meteor_beta, meteor_gamma),
        ce_precision=precision,
        ce_recall=recall,
        ce_f1=f1,
        per_disease=_per_disease(vectors),
    )
