"""Pipeline CLI: curate, generate, evaluate, mock-agents.

One TOML config file carries every knob; command-line flags override it.
Exit codes: 0 success, 2 input/config error, 3 join or contract error,
4 remote-service failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .agents import AgentSpec, generate_candidates, register_agents
from .corpus import iter_all_sentences, load_corpus, sentences_for_study
from .curation import build_subsets, distribution_stats, write_subsets
from .errors import CorpusError, JoinError, ProtocolError, RetryableServiceError
from .labels import AGENT_CATEGORIES, DiseaseCategory, UncertainPolicy
from .labeler import RemoteLabeler, RuleBasedLabeler, label_batch, load_lexicon, report_label_vector
from .metrics import EvaluationPair, evaluate_pairs
from .mock_agents import FixedSentence, MockAgent, serve_mock_agent
from .selection import SelectionConfig, assemble_report, report_json_line, select_unique

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_JOIN = 3
EXIT_SERVICE = 4

MODES = ("end_to_end", "oracle")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    corpus_path: str | None = None
    labeler_backend: str = "rule_based"
    labeler_endpoint: str = ""
    labeler_timeout_ms: int = 10_000
    lexicon_path: str = ""
    curate_output_dir: str = "out"
    uncertain_as_positive: bool = False
    agent_endpoints: list[tuple[DiseaseCategory, str]] = field(default_factory=list)
    agent_timeout_ms: int = 5_000
    agent_max_retries: int = 2
    k: int = 6
    ngram_max: int = 4
    sigma: float = 6.0
    generate_split: str = "test"
    mode: str = "end_to_end"
    parallel: int = 4
    generate_output: str = "out/reports.jsonl"
    evaluate_generated: str = "out/reports.jsonl"
    evaluate_references: str = ""
    evaluate_output: str = ""
    uncertain_policy: UncertainPolicy = UncertainPolicy.AS_POSITIVE
    rouge_beta: float = 1.2
    meteor_alpha: float = 0.9
    meteor_beta: float = 3.0
    meteor_gamma: float = 0.5
    mock_host: str = "127.0.0.1"
    mock_port_base: int = 0
    mock_sentences: dict[str, str] = field(default_factory=dict)


def load_config(path: str | None) -> PipelineConfig:
    config = PipelineConfig()
    if path is None:
        return config
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"config file not found: {file}")
    with file.open("rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {file}: {exc}") from exc

    corpus = raw.get("corpus", {})
    config.corpus_path = corpus.get("path", config.corpus_path)

    labeler = raw.get("labeler", {})
    config.labeler_backend = labeler.get("backend", config.labeler_backend)
    config.labeler_endpoint = labeler.get("endpoint", config.labeler_endpoint)
    config.labeler_timeout_ms = labeler.get("timeout_ms", config.labeler_timeout_ms)
    config.lexicon_path = labeler.get("lexicon", config.lexicon_path)
    if config.labeler_backend not in ("rule_based", "remote"):
        raise ConfigError(f"labeler.backend must be rule_based or remote, got {config.labeler_backend!r}")
    if config.labeler_backend == "remote" and not config.labeler_endpoint:
        raise ConfigError("labeler.backend = remote requires labeler.endpoint")

    curate = raw.get("curate", {})
    config.curate_output_dir = curate.get("output_dir", config.curate_output_dir)
    config.uncertain_as_positive = curate.get("uncertain_as_positive", config.uncertain_as_positive)

    agents = raw.get("agents", {})
    config.agent_timeout_ms = agents.get("timeout_ms", config.agent_timeout_ms)
    config.agent_max_retries = agents.get("max_retries", config.agent_max_retries)
    for entry in agents.get("endpoints", []):
        try:
            category = DiseaseCategory.from_name(entry["category"])
            endpoint = entry["endpoint"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad [[agents.endpoints]] entry {entry!r}: {exc}") from exc
        config.agent_endpoints.append((category, endpoint))

    selection = raw.get("selection", {})
    config.k = selection.get("k", config.k)
    config.ngram_max = selection.get("ngram_max", config.ngram_max)
    config.sigma = selection.get("sigma", config.sigma)

    generate = raw.get("generate", {})
    config.generate_split = generate.get("split", config.generate_split)
    config.mode = generate.get("mode", config.mode)
    config.parallel = generate.get("parallel", config.parallel)
    config.generate_output = generate.get("output", config.generate_output)
    if config.mode not in MODES:
        raise ConfigError(f"generate.mode must be one of {MODES}, got {config.mode!r}")

    evaluate = raw.get("evaluate", {})
    config.evaluate_generated = evaluate.get("generated", config.evaluate_generated)
    config.evaluate_references = evaluate.get("references", config.evaluate_references)
    config.evaluate_output = evaluate.get("output", config.evaluate_output)
    policy = evaluate.get("uncertain_policy", config.uncertain_policy.value)
    try:
        config.uncertain_policy = UncertainPolicy(policy)
    except ValueError:
        raise ConfigError(f"unknown uncertain_policy {policy!r}") from None

    metrics = raw.get("metrics", {})
    config.rouge_beta = metrics.get("rouge_beta", config.rouge_beta)
    config.meteor_alpha = metrics.get("meteor_alpha", config.meteor_alpha)
    config.meteor_beta = metrics.get("meteor_beta", config.meteor_beta)
    config.meteor_gamma = metrics.get("meteor_gamma", config.meteor_gamma)

    mock = raw.get("mock_agents", {})
    config.mock_host = mock.get("host", config.mock_host)
    config.mock_port_base = mock.get("port_base", config.mock_port_base)
    config.mock_sentences = dict(mock.get("sentences", {}))
    return config


def make_backend(config: PipelineConfig):
    if config.labeler_backend == "remote":
        return RemoteLabeler(endpoint=config.labeler_endpoint, timeout_ms=config.labeler_timeout_ms)
    lexicon = load_lexicon(config.lexicon_path) if config.lexicon_path else None
    return RuleBasedLabeler(lexicon=lexicon)


def _selection_config(config: PipelineConfig) -> SelectionConfig:
    return SelectionConfig(k=config.k, ngram_max=config.ngram_max, sigma=config.sigma)


def _require_corpus(config: PipelineConfig) -> Path:
    if not config.corpus_path:
        raise ConfigError("corpus.path is required for this command")
    path = Path(config.corpus_path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    return path


def cmd_curate(config: PipelineConfig, args: argparse.Namespace) -> int:
    studies = load_corpus(_require_corpus(config))
    backend = make_backend(config)
    labeled = label_batch(backend, iter_all_sentences(studies))
    table = distribution_stats(labeled, studies)
    print(table.format_table())
    if args.stats_only:
        return EXIT_OK
    subsets = build_subsets(
        studies, labeled, uncertain_as_positive=config.uncertain_as_positive
    )
    out_dir = Path(config.curate_output_dir)
    written = write_subsets(subsets, out_dir)
    distribution = {
        "counts": table.to_json(),
        "config": {
            "labeler_backend": _backend_tag(config),
            "uncertain_as_positive": config.uncertain_as_positive,
        },
    }
    (out_dir / "distribution.json").write_text(
        json.dumps(distribution, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(written)} subset files to {out_dir}", file=sys.stderr)
    return EXIT_OK


def _backend_tag(config: PipelineConfig) -> str:
    if config.labeler_backend == "remote":
        return f"remote:{config.labeler_endpoint}"
    return "rule_based"


def _oracle_categories(config: PipelineConfig, backend, study) -> set[DiseaseCategory]:
    labeled = label_batch(backend, sentences_for_study(study))
    vector = report_label_vector(labeled, config.uncertain_policy)
    return {c for c in AGENT_CATEGORIES if vector[c]}


def cmd_generate(config: PipelineConfig, args: argparse.Namespace) -> int:
    studies = load_corpus(_require_corpus(config))
    targets = [s for s in studies if s.split == config.generate_split]
    if not config.agent_endpoints:
        raise ConfigError("no [[agents.endpoints]] configured")
    registry = register_agents(
        [
            AgentSpec(
                category=category,
                endpoint=endpoint,
                timeout_ms=config.agent_timeout_ms,
                max_retries=config.agent_max_retries,
            )
            for category, endpoint in config.agent_endpoints
        ]
    )
    selection = _selection_config(config)
    backend = make_backend(config) if config.mode == "oracle" else None

    def run_study(study) -> str | None:
        try:
            result = generate_candidates(registry, study)
            pool = list(result.candidates)
            if config.mode == "oracle":
                allowed = _oracle_categories(config, backend, study)
                pool = [c for c in pool if c.category in allowed]
            failures = result.failed_categories
            if not pool:
                line = {"id": study.id, "report": "", "sentences": [],
                        "failures": [c.value for c in failures]}
                return json.dumps(line, ensure_ascii=False)
            selected, discarded = select_unique(pool, selection)
            report = assemble_report(study.id, selected, discarded, failures)
            return report_json_line(report)
        except ValueError as exc:
            print(f"skipping study {study.id}: {exc}", file=sys.stderr)
            return None

    with ThreadPoolExecutor(max_workers=max(1, config.parallel)) as pool:
        lines = list(pool.map(run_study, targets))

    out_path = Path(config.generate_output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for line in lines:
            if line is not None:
                fh.write(line + "\n")
    kept = sum(1 for line in lines if line is not None)
    print(f"wrote {kept} reports to {out_path}", file=sys.stderr)
    return EXIT_OK


def _read_generated(path: Path) -> list[tuple[str, str]]:
    if not path.exists():
        raise FileNotFoundError(f"generated reports file not found: {path}")
    rows: list[tuple[str, str]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON: {exc.msg}", line=lineno, path=str(path)) from exc
            if not isinstance(record, dict) or "id" not in record or "report" not in record:
                raise CorpusError("line needs 'id' and 'report'", line=lineno, path=str(path))
            rows.append((record["id"], record["report"]))
    return rows


def cmd_evaluate(config: PipelineConfig, args: argparse.Namespace) -> int:
    generated = _read_generated(Path(config.evaluate_generated))
    if not generated:
        print("no generated reports to evaluate", file=sys.stderr)
        return EXIT_INPUT
    references_path = config.evaluate_references or config.corpus_path
    if not references_path:
        raise ConfigError("evaluate.references (or corpus.path) is required")
    if not Path(references_path).exists():
        raise FileNotFoundError(f"reference corpus not found: {references_path}")
    references = {s.id: s.report_text for s in load_corpus(references_path)}
    missing = [sid for sid, _ in generated if sid not in references]
    if missing:
        raise JoinError(missing)
    pairs = [
        EvaluationPair(study_id=sid, hypothesis=hyp, references=(references[sid],))
        for sid, hyp in generated
    ]
    backend = make_backend(config)
    report = evaluate_pairs(
        pairs,
        backend,
        config.uncertain_policy,
        ngram_max=config.ngram_max,
        sigma=config.sigma,
        rouge_beta=config.rouge_beta,
        meteor_alpha=config.meteor_alpha,
        meteor_beta=config.meteor_beta,
        meteor_gamma=config.meteor_gamma,
    )
    payload = {
        "nlg": {"cider": report.cider, "rouge_l": report.rouge_l, "meteor": report.meteor},
        "ce": {
            "precision": report.ce_precision,
            "recall": report.ce_recall,
            "f1": report.ce_f1,
        },
        "per_disease": {
            c.value: {"accuracy": o.accuracy, "recall": o.recall}
            for c, o in report.per_disease.items()
        },
        "config": {
            "pairs": len(pairs),
            "k": config.k,
            "ngram_max": config.ngram_max,
            "sigma": config.sigma,
            "rouge_beta": config.rouge_beta,
            "meteor_alpha": config.meteor_alpha,
            "meteor_beta": config.meteor_beta,
            "meteor_gamma": config.meteor_gamma,
            "meteor_variant": "exact+porter_stem, no synonym tables",
            "labeler_backend": _backend_tag(config),
            "uncertain_policy": config.uncertain_policy.value,
            "selection_mode": config.mode,
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if config.evaluate_output:
        out = Path(config.evaluate_output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        print(f"wrote evaluation to {out}", file=sys.stderr)
    else:
        print(text, end="")
    return EXIT_OK


DEFAULT_MOCK_SENTENCES = {
    c: f"No acute abnormality of the {c.value.lower()} type is seen." for c in AGENT_CATEGORIES
}


def run_mock_agents(
    config: PipelineConfig,
    *,
    started: threading.Event | None = None,
    stop: threading.Event | None = None,
    emit_path: str | None = None,
) -> list[MockAgent]:
    servers: list[MockAgent] = []
    for i, category in enumerate(AGENT_CATEGORIES):
        text = config.mock_sentences.get(category.value, DEFAULT_MOCK_SENTENCES[category])
        port = 0 if config.mock_port_base == 0 else config.mock_port_base + i
        servers.append(
            serve_mock_agent(category, FixedSentence(text), host=config.mock_host, port=port)
        )
    for server in servers:
        print(f"{server.category.value}\t{server.url}")
    if emit_path:
        lines = []
        for server in servers:
            lines.append("[[agents.endpoints]]")
            lines.append(f'category = "{server.category.value}"')
            lines.append(f'endpoint = "{server.url}"')
            lines.append("")
        Path(emit_path).write_text("\n".join(lines), encoding="utf-8")
    if started is not None:
        started.set()
    try:
        if stop is not None:
            stop.wait()
        else:  # run until interrupted
            threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        for server in servers:
            server.close()
    return servers


def cmd_mock_agents(config: PipelineConfig, args: argparse.Namespace) -> int:
    run_mock_agents(config, emit_path=args.emit_endpoints)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radgen",
        description="Multi-agent radiology report generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    curate = sub.add_parser("curate", help="build per-disease training subsets")
    curate.add_argument("--config", required=True)
    curate.add_argument("--stats-only", action="store_true",
                        help="print the distribution table without writing subset files")
    curate.set_defaults(func=cmd_curate)

    generate = sub.add_parser("generate", help="fan out to agents and assemble reports")
    generate.add_argument("--config", required=True)
    generate.add_argument("--k", type=int, help="sentences to keep per report")
    generate.add_argument("--mode", choices=MODES)
    generate.add_argument("--parallel", type=int, help="concurrent studies")
    generate.set_defaults(func=cmd_generate)

    evaluate = sub.add_parser("evaluate", help="score generated against reference reports")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument("--generated", help="generated-report JSONL path")
    evaluate.add_argument("--references", help="reference corpus JSONL path")
    evaluate.add_argument("--output", help="evaluation JSON path (default: stdout)")
    evaluate.set_defaults(func=cmd_evaluate)

    mock = sub.add_parser("mock-agents", help="serve 13 mock agents for integration tests")
    mock.add_argument("--config")
    mock.add_argument("--emit-endpoints", help="write a TOML endpoints fragment here")
    mock.set_defaults(func=cmd_mock_agents)
    return parser


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> None:
    if getattr(args, "k", None) is not None:
        config.k = args.k
    if getattr(args, "mode", None):
        config.mode = args.mode
    if getattr(args, "parallel", None) is not None:
        config.parallel = args.parallel
    if getattr(args, "generated", None):
        config.evaluate_generated = args.generated
    if getattr(args, "references", None):
        config.evaluate_references = args.references
    if getattr(args, "output", None):
        config.evaluate_output = args.output


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(getattr(args, "config", None))
        _apply_overrides(config, args)
        return args.func(config, args)
    except (ConfigError, CorpusError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (JoinError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_JOIN
    except (RetryableServiceError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVICE


if __name__ == "__main__":
    sys.exit(main())
