import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

# noise sentences free of lexicon keywords and mutually token-disjoint
NOISE_TEXTS = [
    "apex looks fine",
    "bases look sharp",
    "ribs appear intact",
    "spine alignment preserved",
    "soft tissues unchanged",
    "diaphragm contour smooth",
    "trachea midline position",
    "hila symmetric bilaterally",
    "osseous structures stable",
    "costophrenic angles crisp",
    "patient rotation limits detail",
    "exposure factors acceptable overall",
    "comparison views were obtained",
]


def write_corpus(path, studies):
    with open(path, "w", encoding="utf-8") as fh:
        for study in studies:
            fh.write(json.dumps(study) + "\n")
    return path


def config_text(
    corpus_path,
    *,
    endpoints=(),
    out_dir=None,
    k=6,
    mode="end_to_end",
    parallel=4,
    generate_output=None,
    evaluate_generated=None,
    evaluate_references=None,
    evaluate_output=None,
    agent_timeout_ms=2000,
    agent_max_retries=1,
    labeler_backend="rule_based",
    labeler_endpoint="",
):
    lines = [
        "[corpus]",
        f'path = "{corpus_path}"',
        "",
        "[labeler]",
        f'backend = "{labeler_backend}"',
    ]
    if labeler_endpoint:
        lines.append(f'endpoint = "{labeler_endpoint}"')
    lines += [
        "",
        "[agents]",
        f"timeout_ms = {agent_timeout_ms}",
        f"max_retries = {agent_max_retries}",
        "",
        "[selection]",
        f"k = {k}",
        "",
        "[generate]",
        'split = "test"',
        f'mode = "{mode}"',
        f"parallel = {parallel}",
    ]
    if generate_output:
        lines.append(f'output = "{generate_output}"')
    if out_dir:
        lines += ["", "[curate]", f'output_dir = "{out_dir}"']
    if evaluate_generated or evaluate_references or evaluate_output:
        lines += ["", "[evaluate]"]
        if evaluate_generated:
            lines.append(f'generated = "{evaluate_generated}"')
        if evaluate_references:
            lines.append(f'references = "{evaluate_references}"')
        if evaluate_output:
            lines.append(f'output = "{evaluate_output}"')
    for category, endpoint in endpoints:
        lines += [
            "",
            "[[agents.endpoints]]",
            f'category = "{category.value}"',
            f'endpoint = "{endpoint}"',
        ]
    return "\n".join(lines) + "\n"


def write_config(path, corpus_path, **kwargs):
    path.write_text(config_text(corpus_path, **kwargs), encoding="utf-8")
    return path
