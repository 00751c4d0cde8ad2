import json
from pathlib import Path

import pytest

from mmret.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = str(FIXTURES / "corpus.tsv")
IMAGES = str(FIXTURES / "images.jsonl")
QUERIES = str(FIXTURES / "queries.jsonl")
JUDGMENTS = str(FIXTURES / "judgments.jsonl")


def make_validation(tmp_path) -> str:
    """Join fixture queries with their judged answers into {question, answers} rows."""
    questions = {}
    for line in (FIXTURES / "queries.jsonl").read_text(encoding="utf-8").splitlines():
        record = json.loads(line)
        questions[record["query_id"]] = record["question"]
    rows = []
    for line in (FIXTURES / "judgments.jsonl").read_text(encoding="utf-8").splitlines():
        record = json.loads(line)
        rows.append({"question": questions[record["query_id"]], "answers": record["answers"]})
    path = tmp_path / "validation.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return str(path)


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["build-index", "--corpus", CORPUS, "--frobnicate"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_missing_required_option(self, capsys):
        assert main(["build-index", "--corpus", CORPUS]) == 1
        assert "--out" in capsys.readouterr().err

    def test_missing_input_file(self, capsys):
        assert main(["build-index", "--corpus", "nope.tsv", "--out", "x.gz"]) == 1
        assert "no such file" in capsys.readouterr().err

    def test_malformed_corpus_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("only-one-column\n", encoding="utf-8")
        assert main(["build-index", "--corpus", str(bad), "--out", str(tmp_path / "i.gz")]) == 2
        assert "data error" in capsys.readouterr().err

    def test_unreachable_model_server_is_adapter_error(self, tmp_path, capsys):
        code = main(
            [
                "generate", "--corpus", CORPUS, "--images", IMAGES,
                "--out", str(tmp_path / "d.jsonl"),
                "--adapters", "remote:http://127.0.0.1:9",
            ]
        )
        assert code == 3
        assert "adapter error" in capsys.readouterr().err

    def test_unknown_adapter_spec_is_usage_error(self, tmp_path, capsys):
        code = main(
            [
                "generate", "--corpus", CORPUS, "--images", IMAGES,
                "--out", str(tmp_path / "d.jsonl"), "--adapters", "bogus",
            ]
        )
        assert code == 1

    def test_unjudged_run_query_is_data_error(self, tmp_path, capsys):
        run = tmp_path / "run.tsv"
        run.write_text("q999\tp001\t1\t1.0\n", encoding="utf-8")
        code = main(
            ["eval", "--corpus", CORPUS, "--run", str(run), "--judgments", JUDGMENTS]
        )
        assert code == 2
        assert "q999" in capsys.readouterr().err


class TestConfigLayering:
    def test_config_supplies_defaults_and_flags_override(self, tmp_path, capsys):
        run = tmp_path / "run.tsv"
        assert main(["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--out", str(run)]) == 0

        config = tmp_path / "config.json"
        config.write_text(json.dumps({"k": 3}), encoding="utf-8")
        out_config = tmp_path / "eval-config.json"
        code = main(
            ["eval", "--corpus", CORPUS, "--run", str(run), "--judgments", JUDGMENTS,
             "--config", str(config), "--out", str(out_config)]
        )
        assert code == 0
        assert json.loads(out_config.read_text())["k"] == 3

        out_flag = tmp_path / "eval-flag.json"
        code = main(
            ["eval", "--corpus", CORPUS, "--run", str(run), "--judgments", JUDGMENTS,
             "--config", str(config), "--k", "5", "--out", str(out_flag)]
        )
        assert code == 0
        assert json.loads(out_flag.read_text())["k"] == 5

    def test_unknown_config_key_is_usage_error(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"kk": 3}), encoding="utf-8")
        code = main(
            ["eval", "--corpus", CORPUS, "--run", "whatever", "--judgments", JUDGMENTS,
             "--config", str(config)]
        )
        assert code == 1
        assert "kk" in capsys.readouterr().err

    def test_invalid_config_json_is_usage_error(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text("{not json", encoding="utf-8")
        assert main(["build-index", "--corpus", CORPUS, "--out", "x", "--config", str(config)]) == 1

    def test_config_list_instead_of_object_rejected(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text("[1, 2]", encoding="utf-8")
        assert main(["build-index", "--corpus", CORPUS, "--out", "x", "--config", str(config)]) == 1


class TestBuildIndex:
    def test_writes_index_and_reports_provenance(self, tmp_path, capsys):
        out = tmp_path / "index.json.gz"
        assert main(["build-index", "--corpus", CORPUS, "--out", str(out)]) == 0
        assert out.exists()
        payload = json.loads(capsys.readouterr().out)
        assert payload["passages"] == 200
        header = payload["header"]
        assert header["tool"] == "mmret"
        assert len(header["config_hash"]) == 16
        int(header["config_hash"], 16)  # hex

    def test_config_hash_tracks_options(self, tmp_path, capsys):
        out = tmp_path / "index.json.gz"
        main(["build-index", "--corpus", CORPUS, "--out", str(out)])
        first = json.loads(capsys.readouterr().out)["header"]["config_hash"]
        main(["build-index", "--corpus", CORPUS, "--format", "tsv", "--out", str(out)])
        second = json.loads(capsys.readouterr().out)["header"]["config_hash"]
        assert first != second


class TestTuneBM25:
    def test_default_grid_has_24_cells(self, tmp_path):
        validation = make_validation(tmp_path)
        out = tmp_path / "tuning.json"
        code = main(
            ["tune-bm25", "--corpus", CORPUS, "--validation", validation, "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload["cells"]) == 24
        best = payload["best"]
        assert best["mrr"] == max(c["mrr"] for c in payload["cells"])

    def test_custom_grid_flags(self, tmp_path):
        validation = make_validation(tmp_path)
        out = tmp_path / "tuning.json"
        code = main(
            ["tune-bm25", "--corpus", CORPUS, "--validation", validation,
             "--k1-grid", "0.9,1.2", "--b-grid", "0.4", "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload["cells"]) == 2
        assert {c["b"] for c in payload["cells"]} == {0.4}

    def test_empty_grid_rejected(self, tmp_path, capsys):
        validation = make_validation(tmp_path)
        code = main(
            ["tune-bm25", "--corpus", CORPUS, "--validation", validation, "--k1-grid", ","]
        )
        assert code == 1


class TestGenerate:
    def test_dataset_with_sidecars_and_stable_bytes(self, tmp_path):
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        for out in (first, second):
            assert main(["generate", "--corpus", CORPUS, "--images", IMAGES, "--out", str(out)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert first.with_suffix(".audit.jsonl").read_bytes() == second.with_suffix(
            ".audit.jsonl"
        ).read_bytes()

        meta = json.loads(first.with_suffix(".meta.json").read_text())
        emitted = meta["report"]["examples_emitted"]
        assert emitted == len(first.read_text().splitlines()) > 0
        assert meta["header"]["seed"] == 0

    def test_worker_flag_does_not_change_output(self, tmp_path):
        serial = tmp_path / "serial.jsonl"
        parallel = tmp_path / "parallel.jsonl"
        assert main(["generate", "--corpus", CORPUS, "--images", IMAGES, "--out", str(serial)]) == 0
        assert (
            main(
                ["generate", "--corpus", CORPUS, "--images", IMAGES, "--out", str(parallel),
                 "--workers", "4"]
            )
            == 0
        )
        assert serial.read_bytes() == parallel.read_bytes()

    def test_threshold_flag_tightens_filter(self, tmp_path):
        loose = tmp_path / "loose.jsonl"
        tight = tmp_path / "tight.jsonl"
        assert main(["generate", "--corpus", CORPUS, "--images", IMAGES, "--out", str(loose)]) == 0
        assert (
            main(
                ["generate", "--corpus", CORPUS, "--images", IMAGES, "--out", str(tight),
                 "--threshold", "0.99"]
            )
            == 0
        )
        assert len(tight.read_text().splitlines()) <= len(loose.read_text().splitlines())


class TestRetrieveEvalCompare:
    def test_bm25_retrieval_writes_commented_tsv(self, tmp_path):
        out = tmp_path / "run.tsv"
        assert main(["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--out", str(out)]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        comments = [l for l in lines if l.startswith("#")]
        data = [l for l in lines if not l.startswith("#")]
        assert any("mode=bm25" in c for c in comments)
        assert data and all(len(l.split("\t")) == 4 for l in data)

    def test_prebuilt_index_matches_on_the_fly(self, tmp_path):
        index_path = tmp_path / "index.json.gz"
        assert main(["build-index", "--corpus", CORPUS, "--out", str(index_path)]) == 0
        direct = tmp_path / "direct.tsv"
        cached = tmp_path / "cached.tsv"
        assert main(["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--out", str(direct)]) == 0
        assert (
            main(
                ["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--out", str(cached),
                 "--index", str(index_path)]
            )
            == 0
        )

        def rows(path):
            return [l for l in path.read_text().splitlines() if not l.startswith("#")]

        assert rows(direct) == rows(cached)

    def test_dense_cache_round_trip_and_mismatch(self, tmp_path):
        cache = tmp_path / "dense.npz"
        first = tmp_path / "first.tsv"
        again = tmp_path / "again.tsv"
        base = ["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--mode", "dense",
                "--dense-index", str(cache)]
        assert main(base + ["--out", str(first)]) == 0
        assert cache.exists()
        assert main(base + ["--out", str(again)]) == 0

        def rows(path):
            return [l for l in path.read_text().splitlines() if not l.startswith("#")]

        assert rows(first) == rows(again)

        small_corpus = tmp_path / "small.tsv"
        small_corpus.write_text("p1\tonly passage\n", encoding="utf-8")
        code = main(
            ["retrieve", "--corpus", str(small_corpus), "--queries", QUERIES, "--mode", "dense",
             "--dense-index", str(cache), "--out", str(tmp_path / "x.tsv")]
        )
        assert code == 2  # cached vectors do not cover this corpus

    def test_full_workflow_generate_train_retrieve_compare(self, tmp_path, capsys):
        dataset = tmp_path / "dataset.jsonl"
        assert main(["generate", "--corpus", CORPUS, "--images", IMAGES, "--out", str(dataset)]) == 0

        embedder = tmp_path / "embedder.npz"
        code = main(
            ["train", "--corpus", CORPUS, "--dataset", str(dataset), "--out", str(embedder),
             "--epochs", "4", "--feature-dim", "128", "--embed-dim", "16"]
        )
        assert code == 0
        meta = json.loads(embedder.with_suffix(".meta.json").read_text())
        assert len(meta["epoch_losses"]) == 4
        assert meta["epoch_losses"][-1] < meta["epoch_losses"][0]

        run_dense = tmp_path / "dense.tsv"
        code = main(
            ["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--mode", "dense",
             "--embedder", str(embedder), "--out", str(run_dense)]
        )
        assert code == 0

        run_bm25 = tmp_path / "bm25.tsv"
        assert main(["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--out", str(run_bm25)]) == 0

        report = tmp_path / "compare.json"
        code = main(
            ["compare", "--corpus", CORPUS, "--run-a", str(run_bm25), "--run-b", str(run_dense),
             "--judgments", JUDGMENTS, "--out", str(report)]
        )
        assert code == 0
        table = capsys.readouterr().out
        assert "mrr@5" in table and "p@5" in table
        payload = json.loads(report.read_text())
        assert payload["queries"] == 20
        assert payload["comparisons"] == 2
        assert set(payload["metrics"]) == {"mrr@5", "p@5"}
        for entry in payload["metrics"].values():
            assert 0.0 <= entry["p_corrected"] <= 1.0

    def test_eval_prints_metric_table(self, tmp_path, capsys):
        run = tmp_path / "run.tsv"
        main(["retrieve", "--corpus", CORPUS, "--queries", QUERIES, "--out", str(run)])
        capsys.readouterr()
        out = tmp_path / "eval.json"
        code = main(
            ["eval", "--corpus", CORPUS, "--run", str(run), "--judgments", JUDGMENTS,
             "--out", str(out)]
        )
        assert code == 0
        table = capsys.readouterr().out
        assert "metric" in table and "mrr@5" in table
        payload = json.loads(out.read_text())
        assert payload["mrr@5"] == 1.0  # fixture queries are lexically easy for bm25


class TestVersion:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert "mmret" in capsys.readouterr().out
