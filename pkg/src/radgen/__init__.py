"""Multi-agent radiology report generation pipeline.

Decomposes report generation into 13 disease-specialized sentence agents:
corpora are split to sentences and labeled per observation category, training
subsets are curated per disease, inference fans out one request per agent,
the most mutually-unique candidate sentences are selected via pairwise CIDEr
scoring, and assembled reports are evaluated with NLG and clinical-efficacy
metrics.
"""

from .agents import (
    AgentRegistry,
    AgentSpec,
    CandidateSentence,
    FanoutResult,
    generate_candidates,
    register_agents,
)
from .corpus import (
    Sentence,
    Study,
    load_corpus,
    sentences_for_study,
    split_sentences,
    tokenize,
)
from .curation import (
    DistributionTable,
    SubsetEntry,
    build_subsets,
    distribution_stats,
    write_subsets,
)
from .errors import CorpusError, JoinError, ProtocolError, RetryableServiceError
from .labels import (
    AGENT_CATEGORIES,
    DiseaseCategory,
    LabeledSentence,
    ObservationState,
    UncertainPolicy,
)
from .labeler import (
    RemoteLabeler,
    RuleBasedLabeler,
    default_lexicon,
    label_batch,
    report_label_vector,
)
from .metrics import (
    EvaluationPair,
    EvaluationReport,
    ce_metrics,
    cider,
    evaluate_pairs,
    lcs_length,
    meteor,
    per_disease_eval,
    rouge_l,
)
from .selection import (
    GeneratedReport,
    ScoredSentence,
    SelectionConfig,
    assemble_report,
    pairwise_cider_matrix,
    select_unique,
)

__version__ = "0.1.0"

__all__ = [
    "AGENT_CATEGORIES",
    "AgentRegistry",
    "AgentSpec",
    "CandidateSentence",
    "CorpusError",
    "DiseaseCategory",
    "DistributionTable",
    "EvaluationPair",
    "EvaluationReport",
    "FanoutResult",
    "GeneratedReport",
    "JoinError",
    "LabeledSentence",
    "ObservationState",
    "ProtocolError",
    "RemoteLabeler",
    "RetryableServiceError",
    "RuleBasedLabeler",
    "ScoredSentence",
    "SelectionConfig",
    "Sentence",
    "Study",
    "SubsetEntry",
    "UncertainPolicy",
    "assemble_report",
    "build_subsets",
    "ce_metrics",
    "cider",
    "default_lexicon",
    "distribution_stats",
    "evaluate_pairs",
    "generate_candidates",
    "label_batch",
    "lcs_length",
    "load_corpus",
    "meteor",
    "pairwise_cider_matrix",
    "per_disease_eval",
    "register_agents",
    "report_label_vector",
    "rouge_l",
    "select_unique",
    "sentences_for_study",
    "split_sentences",
    "tokenize",
    "write_subsets",
]
