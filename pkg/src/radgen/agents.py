"""Disease-agent registry and concurrent per-study inference fan-out.

Every registered agent is queried in parallel with its own timeout and retry
budget; one slow or dead agent never blocks the others. Partial failure is a
result, not an exception: each category lands in exactly one of the
candidates/failures lists.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from . import _http
from .corpus import Study, split_sentences
from .errors import ProtocolError, RetryableServiceError
from .labels import DiseaseCategory


@dataclass(frozen=True)
class AgentSpec:
    """Identity and endpoint of one disease-specialized agent."""

    category: DiseaseCategory
    endpoint: str
    timeout_ms: int = 5_000
    max_retries: int = 2

    def __post_init__(self):
        if not self.category.has_agent:
            raise ValueError("No Finding has no agent")
        if not self.endpoint:
            raise ValueError("endpoint must be non-empty")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class CandidateSentence:
    category: DiseaseCategory
    text: str
    latency_ms: int = 0
    attempt: int = 1

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("candidate text must be non-empty")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")
        if self.attempt < 1:
            raise ValueError("attempt is 1-based")


@dataclass(frozen=True)
class FanoutResult:
    study_id: str
    candidates: tuple[CandidateSentence, ...]
    failures: tuple[tuple[DiseaseCategory, str], ...]

    @property
    def failed_categories(self) -> tuple[DiseaseCategory, ...]:
        return tuple(c for c, _ in self.failures)


@dataclass(frozen=True)
class AgentRegistry:
    """Immutable set of agents, at most one per category, canonical order."""

    specs: tuple[AgentSpec, ...] = field(hash=False)

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[AgentSpec]:
        return iter(self.specs)

    @property
    def categories(self) -> tuple[DiseaseCategory, ...]:
        return tuple(s.category for s in self.specs)


def register_agents(specs: Sequence[AgentSpec]) -> AgentRegistry:
    """Validate and freeze an agent registry (1..13 agents, unique categories)."""
    if not specs:
        raise ValueError("registry needs at least one agent")
    seen: set[DiseaseCategory] = set()
    for spec in specs:
        if spec.category in seen:
            raise ValueError(f"duplicate agent for category {spec.category.value!r}")
        seen.add(spec.category)
    ordered = tuple(sorted(specs, key=lambda s: s.category.order))
    return AgentRegistry(specs=ordered)


def _query_agent(spec: AgentSpec, study: Study) -> CandidateSentence:
    payload = {
        "study_id": study.id,
        "images": list(study.image_refs),
        "category": spec.category.value,
    }
    body, attempt, elapsed_ms = _http.post_json(
        spec.endpoint.rstrip("/") + "/generate",
        payload,
        timeout_ms=spec.timeout_ms,
        max_retries=spec.max_retries,
    )
    sentence = body.get("sentence")
    if not isinstance(sentence, str) or not sentence.strip():
        raise ProtocolError(f"agent {spec.category.value} returned no usable 'sentence'")
    # agents may over-generate; keep only the first sentence
    first = split_sentences(sentence)[0]
    return CandidateSentence(
        category=spec.category, text=first, latency_ms=elapsed_ms, attempt=attempt
    )


def generate_candidates(registry: AgentRegistry, study: Study) -> FanoutResult:
    """Fan out one request per registered agent, all concurrently.

    Per-agent timeouts and retries are independent; failures are collected,
    never raised, so the healthy agents' candidates always come back. Raises
    only on contract violations (study without images).
    """
    if not study.image_refs:
        raise ValueError(f"study {study.id!r} has no image refs")
    candidates: list[CandidateSentence] = []
    failures: list[tuple[DiseaseCategory, str]] = []
    with ThreadPoolExecutor(max_workers=len(registry)) as pool:
        futures = [(spec, pool.submit(_query_agent, spec, study)) for spec in registry]
        for spec, future in futures:
            try:
                candidates.append(future.result())
            except (RetryableServiceError, ProtocolError) as exc:
                failures.append((spec.category, str(exc)))
    return FanoutResult(
        study_id=study.id, candidates=tuple(candidates), failures=tuple(failures)
    )
