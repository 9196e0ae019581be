import json
import threading

import pytest

from conftest import NOISE_TEXTS, write_config, write_corpus
from radgen.cli import PipelineConfig, load_config, main, run_mock_agents
from radgen.labels import AGENT_CATEGORIES, DiseaseCategory

D = DiseaseCategory

import requests

from radgen.mock_agents import FailAlways, FixedSentence, serve_mock_registry


@pytest.fixture
def mock_fleet():
    """13 deterministic agents, one keyword-free noise sentence each."""
    behaviors = {
        c: FixedSentence(f"{NOISE_TEXTS[i].capitalize()}.")
        for i, c in enumerate(AGENT_CATEGORIES)
    }
    servers = serve_mock_registry(behaviors)
    yield servers
    for server in servers:
        server.close()


def endpoints_of(servers):
    return [(s.category, s.url) for s in servers]


def small_corpus(tmp_path, name="corpus.jsonl"):
    studies = [
        {"id": "s1", "split": "train",
         "report": "Stable cardiomegaly. No pleural effusion.", "images": ["s1.png"]},
        {"id": "s2", "split": "validation",
         "report": "Lungs are clear.", "images": ["s2.png"]},
        {"id": "s3", "split": "test",
         "report": "There is edema. Possible pneumonia.", "images": ["s3.png"]},
    ]
    return write_corpus(tmp_path / name, studies)


class TestCurate:
    def test_writes_subsets_and_stats(self, tmp_path, capsys):
        corpus = small_corpus(tmp_path)
        out_dir = tmp_path / "out"
        config = write_config(tmp_path / "cfg.toml", corpus, out_dir=out_dir)
        assert main(["curate", "--config", str(config)]) == 0
        stdout = capsys.readouterr().out
        assert "Cardiomegaly" in stdout

        # hand counts: cardiomegaly pos train, effusion neg train, edema pos test
        def lines(name):
            return (out_dir / name).read_text().splitlines()

        assert len(lines("subset_cardiomegaly.jsonl")) == 1
        assert len(lines("subset_pleural_effusion.jsonl")) == 1
        assert len(lines("subset_edema.jsonl")) == 1
        assert len(lines("subset_pneumonia.jsonl")) == 0  # uncertain excluded
        record = json.loads(lines("subset_cardiomegaly.jsonl")[0])
        assert record["id"] == "s1"
        assert record["state"] == "positive"

        distribution = json.loads((out_dir / "distribution.json").read_text())
        assert distribution["counts"]["Cardiomegaly"]["train"] == 1
        assert distribution["counts"]["Pleural Effusion"]["train"] == 1
        assert distribution["counts"]["Edema"]["test"] == 1
        assert distribution["counts"]["No Finding"]["validation"] == 1

    def test_stats_only_writes_nothing(self, tmp_path, capsys):
        corpus = small_corpus(tmp_path)
        out_dir = tmp_path / "out"
        config = write_config(tmp_path / "cfg.toml", corpus, out_dir=out_dir)
        assert main(["curate", "--config", str(config), "--stats-only"]) == 0
        assert "Cardiomegaly" in capsys.readouterr().out
        assert not out_dir.exists()

    def test_missing_corpus_exits_2_naming_path(self, tmp_path, capsys):
        config = write_config(tmp_path / "cfg.toml", tmp_path / "nope.jsonl")
        assert main(["curate", "--config", str(config)]) == 2
        assert "nope.jsonl" in capsys.readouterr().err

    def test_missing_config_exits_2(self, tmp_path, capsys):
        assert main(["curate", "--config", str(tmp_path / "ghost.toml")]) == 2
        assert "ghost.toml" in capsys.readouterr().err


class TestGenerate:
    def three_test_studies(self, tmp_path):
        studies = [
            {"id": f"t{i}", "split": "test", "report": "Reference text here.",
             "images": [f"t{i}.png"]}
            for i in range(3)
        ]
        return write_corpus(tmp_path / "corpus.jsonl", studies)

    def test_three_studies_thirteen_mocks_k6(self, tmp_path, mock_fleet):
        corpus = self.three_test_studies(tmp_path)
        output = tmp_path / "reports.jsonl"
        config = write_config(
            tmp_path / "cfg.toml", corpus,
            endpoints=endpoints_of(mock_fleet), generate_output=output,
        )
        assert main(["generate", "--config", str(config)]) == 0
        rows = [json.loads(line) for line in output.read_text().splitlines()]
        assert [r["id"] for r in rows] == ["t0", "t1", "t2"]
        for row in rows:
            assert len(row["sentences"]) == 6
            assert row["failures"] == []
            assert row["report"].count(".") == 6

    def test_failing_agent_listed_in_every_report(self, tmp_path, mock_fleet):
        corpus = self.three_test_studies(tmp_path)
        broken = serve_mock_registry({D.FRACTURE: FailAlways()})[0]
        try:
            endpoints = [
                (c, broken.url if c is D.FRACTURE else url)
                for c, url in endpoints_of(mock_fleet)
            ]
            output = tmp_path / "reports.jsonl"
            config = write_config(
                tmp_path / "cfg.toml", corpus,
                endpoints=endpoints, generate_output=output, agent_max_retries=0,
            )
            assert main(["generate", "--config", str(config)]) == 0
            rows = [json.loads(line) for line in output.read_text().splitlines()]
            for row in rows:
                assert row["failures"] == ["Fracture"]
                assert len(row["sentences"]) == 6
        finally:
            broken.close()

    def test_k13_flag_gives_full_reports(self, tmp_path, mock_fleet):
        corpus = self.three_test_studies(tmp_path)
        output = tmp_path / "reports.jsonl"
        config = write_config(
            tmp_path / "cfg.toml", corpus,
            endpoints=endpoints_of(mock_fleet), generate_output=output,
        )
        assert main(["generate", "--config", str(config), "--k", "13"]) == 0
        rows = [json.loads(line) for line in output.read_text().splitlines()]
        for row in rows:
            assert len(row["sentences"]) == 13

    def test_byte_identical_across_runs(self, tmp_path, mock_fleet):
        corpus = self.three_test_studies(tmp_path)
        out_a = tmp_path / "a.jsonl"
        out_b = tmp_path / "b.jsonl"
        for output in (out_a, out_b):
            config = write_config(
                tmp_path / f"cfg_{output.stem}.toml", corpus,
                endpoints=endpoints_of(mock_fleet), generate_output=output,
            )
            assert main(["generate", "--config", str(config), "--parallel", "3"]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_no_agents_configured_exits_2(self, tmp_path):
        corpus = self.three_test_studies(tmp_path)
        config = write_config(tmp_path / "cfg.toml", corpus)
        assert main(["generate", "--config", str(config)]) == 2


IDENTITY_STUDIES = [
    {"id": "s1", "split": "test",
     "report": "The cardiac silhouette is enlarged again today.", "images": ["s1.png"]},
    {"id": "s2", "split": "test",
     "report": "Interstitial edema has worsened since prior.", "images": ["s2.png"]},
    {"id": "s3", "split": "test",
     "report": "Small right pleural effusion noted.", "images": ["s3.png"]},
]


class TestEvaluate:
    def test_identity_reports_max_scores(self, tmp_path):
        corpus = write_corpus(tmp_path / "corpus.jsonl", IDENTITY_STUDIES)
        generated = tmp_path / "generated.jsonl"
        with generated.open("w") as fh:
            for study in IDENTITY_STUDIES:
                fh.write(json.dumps({"id": study["id"], "report": study["report"]}) + "\n")
        output = tmp_path / "evaluation.json"
        config = write_config(
            tmp_path / "cfg.toml", corpus,
            evaluate_generated=generated, evaluate_references=corpus, evaluate_output=output,
        )
        assert main(["evaluate", "--config", str(config)]) == 0
        result = json.loads(output.read_text())
        assert result["nlg"]["cider"] == pytest.approx(10.0, abs=1e-9)
        assert result["nlg"]["rouge_l"] == pytest.approx(1.0)
        assert result["ce"] == {"precision": 1.0, "recall": 1.0, "f1": 1.0}
        assert result["config"]["labeler_backend"] == "rule_based"
        assert result["per_disease"]["Cardiomegaly"]["recall"] == 1.0
        assert result["per_disease"]["Fracture"]["recall"] is None

    def test_disjoint_ids_exit_3_listing_them(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "corpus.jsonl", IDENTITY_STUDIES)
        generated = tmp_path / "generated.jsonl"
        generated.write_text(json.dumps({"id": "zz9", "report": "Anything."}) + "\n")
        config = write_config(
            tmp_path / "cfg.toml", corpus,
            evaluate_generated=generated, evaluate_references=corpus,
        )
        assert main(["evaluate", "--config", str(config)]) == 3
        assert "zz9" in capsys.readouterr().err

    def test_empty_generated_exits_2(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "corpus.jsonl", IDENTITY_STUDIES)
        generated = tmp_path / "generated.jsonl"
        generated.write_text("")
        config = write_config(
            tmp_path / "cfg.toml", corpus,
            evaluate_generated=generated, evaluate_references=corpus,
        )
        assert main(["evaluate", "--config", str(config)]) == 2

    def test_stdout_when_no_output_configured(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path / "corpus.jsonl", IDENTITY_STUDIES)
        generated = tmp_path / "generated.jsonl"
        with generated.open("w") as fh:
            for study in IDENTITY_STUDIES:
                fh.write(json.dumps({"id": study["id"], "report": study["report"]}) + "\n")
        config = write_config(
            tmp_path / "cfg.toml", corpus,
            evaluate_generated=generated, evaluate_references=corpus,
        )
        assert main(["evaluate", "--config", str(config)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"nlg", "ce", "per_disease", "config"}


class TestOracleMode:
    def test_oracle_recall_at_least_end_to_end(self, tmp_path):
        # truth categories sit late in canonical order, so end-to-end
        # tie-breaking fills k=6 with earlier (noise) categories
        report = "Small right pleural effusion noted. Acute rib fracture present."
        corpus = write_corpus(
            tmp_path / "corpus.jsonl",
            [{"id": "s1", "split": "test", "report": report, "images": ["s1.png"]}],
        )
        behaviors = {}
        noise = iter(NOISE_TEXTS)
        for category in AGENT_CATEGORIES:
            if category is D.PLEURAL_EFFUSION:
                behaviors[category] = FixedSentence("Small right pleural effusion noted.")
            elif category is D.FRACTURE:
                behaviors[category] = FixedSentence("Acute rib fracture present.")
            else:
                behaviors[category] = FixedSentence(f"{next(noise).capitalize()}.")
        servers = serve_mock_registry(behaviors)
        try:
            recalls = {}
            for mode in ("end_to_end", "oracle"):
                generated = tmp_path / f"reports_{mode}.jsonl"
                evaluation = tmp_path / f"evaluation_{mode}.json"
                config = write_config(
                    tmp_path / f"cfg_{mode}.toml", corpus,
                    endpoints=endpoints_of(servers), mode=mode,
                    generate_output=generated,
                    evaluate_generated=generated, evaluate_references=corpus,
                    evaluate_output=evaluation,
                )
                assert main(["generate", "--config", str(config)]) == 0
                assert main(["evaluate", "--config", str(config)]) == 0
                recalls[mode] = json.loads(evaluation.read_text())["ce"]["recall"]
            assert recalls["oracle"] >= recalls["end_to_end"]
            assert recalls["oracle"] == 1.0
            assert recalls["end_to_end"] == 0.0
        finally:
            for server in servers:
                server.close()


class TestMockAgentsCommand:
    def test_serves_and_emits_endpoints(self, tmp_path, capsys):
        emit = tmp_path / "endpoints.toml"
        started = threading.Event()
        stop = threading.Event()
        config = PipelineConfig()
        thread = threading.Thread(
            target=run_mock_agents,
            args=(config,),
            kwargs={"started": started, "stop": stop, "emit_path": str(emit)},
            daemon=True,
        )
        thread.start()
        assert started.wait(timeout=10)
        try:
            text = emit.read_text()
            assert text.count("[[agents.endpoints]]") == 13
            url = next(
                line.split('"')[1] for line in text.splitlines() if line.startswith("endpoint")
            )
            response = requests.post(
                url + "/generate",
                json={"study_id": "x", "images": ["i.png"], "category": "Cardiomegaly"},
                timeout=5,
            )
            assert response.status_code == 200
            assert response.json()["sentence"]
        finally:
            stop.set()
            thread.join(timeout=10)


class TestConfigParsing:
    def test_defaults_without_file(self):
        config = load_config(None)
        assert config.k == 6
        assert config.mode == "end_to_end"

    def test_bad_mode_rejected(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('[generate]\nmode = "telepathy"\n')
        with pytest.raises(ValueError):
            load_config(str(path))

    def test_remote_backend_requires_endpoint(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('[labeler]\nbackend = "remote"\n')
        with pytest.raises(ValueError):
            load_config(str(path))

    def test_endpoints_parsed(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("")
        path = write_config(
            tmp_path / "cfg.toml", corpus,
            endpoints=[(D.EDEMA, "http://127.0.0.1:9999")],
        )
        config = load_config(str(path))
        assert config.agent_endpoints == [(D.EDEMA, "http://127.0.0.1:9999")]

    def test_bad_category_in_endpoints(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('[[agents.endpoints]]\ncategory = "Bogus"\nendpoint = "http://x"\n')
        with pytest.raises(ValueError):
            load_config(str(path))
