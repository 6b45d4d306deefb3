"""Command-line workflow: configs, artifacts, exit codes, overrides."""

import json
import logging

import pytest

from conftest import CORPUS_MANIFEST
from promptgate.cli import main
from promptgate.embed import hash_embed
from promptgate.learn import load_model, predict_proba


@pytest.fixture(autouse=True)
def _no_service_env(monkeypatch):
    for var in ("PROMPTGATE_MODEL", "PROMPTGATE_LISTEN", "PROMPTGATE_THRESHOLD"):
        monkeypatch.delenv(var, raising=False)


def write_config(root, out, **extra):
    payload = {
        "manifest": str(CORPUS_MANIFEST),
        "provider": {"kind": "local-hash", "dim": 384},
        "split": {"seed": 42, "test_fraction": 0.25},
        "output_dir": str(out),
        "project": {"perplexities": [5, 15], "seed": 0},
    }
    payload.update(extra)
    path = root / "config.json"
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One fully-run ingest/embed/train workspace shared by read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    out = root / "out"
    config_path = write_config(root, out)
    assert main(["ingest", "--config", str(config_path)]) == 0
    assert main(["embed", "--config", str(config_path)]) == 0
    assert main(["train", "--config", str(config_path)]) == 0
    return config_path, out


class TestIngest:
    def test_summary_and_artifacts(self, tmp_path, capsys):
        out = tmp_path / "out"
        config = write_config(tmp_path, out)
        assert main(["ingest", "--config", str(config)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines == [
            "accepted 200 records (153 benign, 47 malicious); "
            "rejected 10 rows (8 unparseable, 2 invalid); "
            "removed 0 duplicates (0 label conflicts)",
            "split seed 42: 150 train / 50 test",
            f"wrote {out / 'corpus.csv'} and {out / 'split.json'}",
        ]
        corpus_lines = (out / "corpus.csv").read_text(encoding="utf-8").splitlines()
        assert corpus_lines[0] == "id,source,label,text"
        assert len(corpus_lines) == 201

        split = json.loads((out / "split.json").read_text(encoding="utf-8"))
        assert split["seed"] == 42
        assert split["test_fraction"] == 0.25
        assert len(split["train_ids"]) == 150
        assert len(split["test_ids"]) == 50
        assert not set(split["train_ids"]) & set(split["test_ids"])

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "out"
        config = write_config(tmp_path, out)
        assert main(["ingest", "--config", str(config)]) == 0
        first = ((out / "corpus.csv").read_bytes(), (out / "split.json").read_bytes())
        assert main(["ingest", "--config", str(config)]) == 0
        second = ((out / "corpus.csv").read_bytes(), (out / "split.json").read_bytes())
        assert first == second

    def test_seed_override(self, tmp_path, capsys):
        out = tmp_path / "out"
        config = write_config(tmp_path, out)
        assert main(["ingest", "--config", str(config), "--seed", "7"]) == 0
        assert "split seed 7: 150 train / 50 test" in capsys.readouterr().out
        split = json.loads((out / "split.json").read_text(encoding="utf-8"))
        assert split["seed"] == 7

    def test_out_override(self, tmp_path):
        config = write_config(tmp_path, tmp_path / "ignored")
        other = tmp_path / "elsewhere"
        assert main(["ingest", "--config", str(config), "--out", str(other)]) == 0
        assert (other / "corpus.csv").exists()
        assert not (tmp_path / "ignored").exists()

    def test_missing_manifest(self, tmp_path, capsys):
        config = write_config(tmp_path, tmp_path / "out", manifest=str(tmp_path / "nope.json"))
        assert main(["ingest", "--config", str(config)]) == 2
        err = capsys.readouterr().err
        assert "error: manifest not found" in err
        assert "hint: see `promptgate <subcommand> --help` for usage" in err


class TestConfig:
    def test_config_file_not_found(self, tmp_path, capsys):
        assert main(["ingest", "--config", str(tmp_path / "absent.json")]) == 2
        assert "config file not found" in capsys.readouterr().err

    def test_config_not_json(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["ingest", "--config", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_seed_is_mandatory(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps({"manifest": str(CORPUS_MANIFEST), "split": {"test_fraction": 0.25}}),
            encoding="utf-8",
        )
        assert main(["ingest", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "split.seed" in err
        assert "seeds are mandatory" in err

    def test_unknown_classifier(self, tmp_path, capsys):
        config = write_config(tmp_path, tmp_path / "out", classifiers=["svm"])
        assert main(["ingest", "--config", str(config)]) == 2
        assert "unknown classifier 'svm'" in capsys.readouterr().err

    def test_bad_test_fraction(self, tmp_path, capsys):
        config = write_config(
            tmp_path, tmp_path / "out", split={"seed": 1, "test_fraction": 1.5}
        )
        assert main(["ingest", "--config", str(config)]) == 2
        assert "test_fraction" in capsys.readouterr().err

    def test_argparse_usage_errors(self, tmp_path):
        with pytest.raises(SystemExit):
            main([])
        with pytest.raises(SystemExit):
            main(["ingest"])  # --config is required
        with pytest.raises(SystemExit):
            main(["embed", "--config", "c.json", "--provider", "sbert"])


class TestEmbed:
    def test_requires_ingest_artifacts(self, tmp_path, capsys):
        config = write_config(tmp_path, tmp_path / "out")
        assert main(["embed", "--config", str(config)]) == 2
        assert "run `promptgate ingest` first" in capsys.readouterr().err

    def test_writes_cache_and_resumes(self, tmp_path, capsys):
        out = tmp_path / "out"
        config = write_config(tmp_path, out)
        assert main(["ingest", "--config", str(config)]) == 0
        assert main(["embed", "--config", str(config)]) == 0
        cache = out / "embeddings-local-hash-384.csv"
        assert f"embedded 200 records at dim 384 -> {cache}" in capsys.readouterr().out
        first = cache.read_bytes()
        assert main(["embed", "--config", str(config)]) == 0
        assert cache.read_bytes() == first

    def test_provider_kind_override(self, tmp_path):
        out = tmp_path / "out"
        config = write_config(
            tmp_path,
            out,
            provider={
                "kind": "remote",
                "model_name": "stub",
                "base_url": "http://127.0.0.1:1",
                "dim": 384,
            },
        )
        assert main(["ingest", "--config", str(config)]) == 0
        # forcing local-hash must not touch the (dead) remote endpoint
        assert main(["embed", "--config", str(config), "--provider", "local-hash"]) == 0
        assert (out / "embeddings-local-hash-384.csv").exists()


class TestTrainEval:
    def test_train_writes_model_per_family(self, workspace):
        _, out = workspace
        for family in ("logreg", "forest", "gbt"):
            path = out / f"model-local-hash-384-{family}.json"
            assert path.exists()
            assert load_model(path).family == family

    def test_train_requires_cache(self, tmp_path, capsys):
        config = write_config(tmp_path, tmp_path / "out")
        assert main(["ingest", "--config", str(config)]) == 0
        assert main(["train", "--config", str(config)]) == 2
        assert "run `promptgate embed` first" in capsys.readouterr().err

    def test_eval_reports_and_comparison(self, workspace, capsys):
        config_path, out = workspace
        assert main(["eval", "--config", str(config_path)]) == 0
        captured = capsys.readouterr()
        assert captured.out.startswith("| Provider | Model | AUC | Precision | Recall | F1 |")
        assert "wrote 3 reports and comparison files" in captured.err
        for family in ("logreg", "forest", "gbt"):
            report_path = out / f"report-local-hash-384-{family}.json"
            (report,) = json.loads(report_path.read_text(encoding="utf-8"))
            assert report["model_tag"] == family
            assert 0.0 <= report["auc"] <= 1.0
        assert (out / "comparison.md").read_text(encoding="utf-8") == captured.out
        comparison = json.loads((out / "comparison.json").read_text(encoding="utf-8"))
        assert {r["model_tag"] for r in comparison["reports"]} == {"logreg", "forest", "gbt"}

    def test_eval_requires_models(self, tmp_path, capsys):
        out = tmp_path / "out"
        config = write_config(tmp_path, out)
        assert main(["ingest", "--config", str(config)]) == 0
        assert main(["embed", "--config", str(config)]) == 0
        assert main(["eval", "--config", str(config)]) == 2
        assert "run `promptgate train` first" in capsys.readouterr().err

    def test_corrupted_cache_fails_with_row_id(self, tmp_path, caplog):
        out = tmp_path / "out"
        config = write_config(tmp_path, out)
        assert main(["ingest", "--config", str(config)]) == 0
        assert main(["embed", "--config", str(config)]) == 0
        cache = out / "embeddings-local-hash-384.csv"
        lines = cache.read_text(encoding="utf-8").splitlines()
        fields = lines[3].split(",")
        row_id = fields[0]
        fields[3] = "bogus"
        lines[3] = ",".join(fields)
        cache.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with caplog.at_level(logging.ERROR):
            assert main(["train", "--config", str(config)]) == 1
        assert row_id in caplog.text


class TestPipeline:
    def test_single_command_produces_everything(self, tmp_path, capsys):
        out = tmp_path / "out"
        config = write_config(tmp_path, out)
        assert main(["pipeline", "--config", str(config)]) == 0
        for name in (
            "corpus.csv",
            "split.json",
            "embeddings-local-hash-384.csv",
            "model-local-hash-384-logreg.json",
            "model-local-hash-384-forest.json",
            "model-local-hash-384-gbt.json",
            "report-local-hash-384-logreg.json",
            "report-local-hash-384-forest.json",
            "report-local-hash-384-gbt.json",
            "comparison.md",
            "comparison.json",
        ):
            assert (out / name).exists(), name
        assert "| Provider | Model |" in capsys.readouterr().out


class TestProject:
    def test_figures_and_summaries(self, workspace, capsys):
        config_path, out = workspace
        assert main(["project", "--config", str(config_path)]) == 0
        assert "projected 200 rows" in capsys.readouterr().out
        assert (out / "pca.svg").read_text(encoding="utf-8").startswith("<svg")
        for name in ("tsne_p5.svg", "tsne_p15.svg"):
            assert "t-SNE (perplexity=" in (out / name).read_text(encoding="utf-8")

        variance = json.loads((out / "variance.json").read_text(encoding="utf-8"))
        r1, r2 = variance["explained_variance_ratio"]
        assert r1 >= r2 >= 0.0
        assert r1 + r2 <= 1.0 + 1e-12

        sweep = json.loads((out / "sweep.json").read_text(encoding="utf-8"))
        assert [entry["perplexity"] for entry in sweep] == [5.0, 15.0]
        for entry in sweep:
            assert 0.0 <= entry["knn_preservation"] <= 1.0

    def test_requires_cache(self, tmp_path, capsys):
        config = write_config(tmp_path, tmp_path / "out")
        assert main(["project", "--config", str(config)]) == 2
        assert "embedding cache not found" in capsys.readouterr().err


class TestDetect:
    def test_scores_one_prompt(self, workspace, capsys):
        config_path, out = workspace
        model_path = out / "model-local-hash-384-logreg.json"
        rc = main(
            [
                "detect",
                "--config",
                str(config_path),
                "--model",
                str(model_path),
                "--text",
                "please summarize this document",
            ]
        )
        assert rc == 0
        body = json.loads(capsys.readouterr().out)
        model = load_model(model_path)
        expected = float(
            predict_proba(model, hash_embed("please summarize this document", 384)[None, :])[0]
        )
        assert body["score"] == pytest.approx(expected, abs=1e-12)
        assert body["label"] in ("benign", "malicious")
        assert body["threshold"] == 0.5

    def test_model_from_environment(self, workspace, capsys, monkeypatch):
        config_path, out = workspace
        monkeypatch.setenv(
            "PROMPTGATE_MODEL", str(out / "model-local-hash-384-logreg.json")
        )
        assert main(["detect", "--config", str(config_path), "--text", "hi there"]) == 0
        assert "score" in json.loads(capsys.readouterr().out)

    def test_no_model_given(self, workspace, capsys):
        config_path, _ = workspace
        assert main(["detect", "--config", str(config_path), "--text", "hi"]) == 2
        assert "no model given" in capsys.readouterr().err

    def test_threshold_flag_beats_environment(self, workspace, capsys, monkeypatch):
        config_path, out = workspace
        monkeypatch.setenv(
            "PROMPTGATE_MODEL", str(out / "model-local-hash-384-logreg.json")
        )
        monkeypatch.setenv("PROMPTGATE_THRESHOLD", "0.1")
        assert main(["detect", "--config", str(config_path), "--text", "hello"]) == 0
        assert json.loads(capsys.readouterr().out)["threshold"] == 0.1

        rc = main(
            ["detect", "--config", str(config_path), "--text", "hello", "--threshold", "0.9"]
        )
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["threshold"] == 0.9
