"""Tests for the command-line front end."""

import json
import os

import pandas as pd
import pytest

from concept_engine.cli import STATS_FILES, ConceptCLI
from concept_engine.config import CONFIG_ENV_VAR
from database.dataset_operations import export_csv, ingest
from extraction.simulator import ground_truth_records, household_scene, render_scene


@pytest.fixture(autouse=True)
def no_env_config(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


@pytest.fixture
def cli():
    return ConceptCLI()


@pytest.fixture
def household_csv(tmp_path):
    records = ground_truth_records(household_scene(seed=0, instances_per_class=4), repetitions=2)
    return export_csv(records, str(tmp_path / "household.csv"))


def run(cli, *argv) -> int:
    return cli.run([str(a) for a in argv])


# ---------------------------------------------------------------------------
# Simulation and Extraction
# ---------------------------------------------------------------------------

class TestSimulateExtract:
    def test_scene_command(self, cli, tmp_path, capsys):
        out = tmp_path / "scene.txt"
        assert run(cli, "scene", "--instances", 1, "--out", out) == 0
        assert "11 objects in 11 classes" in capsys.readouterr().out
        assert out.exists()

    def test_bundles_to_statistics(self, cli, tmp_path, capsys, box, cup):
        scene = tmp_path / "scene.txt"
        scene.write_text(render_scene([box, cup]), encoding="utf-8")
        bundles, dataset, stats = tmp_path / "bundles", tmp_path / "data" / "dataset.csv", tmp_path / "stats"

        assert run(cli, "simulate", scene, "--out", bundles, "--repetitions", 2) == 0
        assert len(os.listdir(bundles)) == 4

        assert run(cli, "extract", bundles, "--out", dataset, "--json") == 0
        records = ingest(str(dataset))
        assert len(records) == 4
        assert records.classes() == ["cup", "metal_box"]
        assert (tmp_path / "data" / "dataset.json").exists()

        assert run(cli, "stats", dataset, "--out", stats) == 0
        for name in STATS_FILES.values():
            assert (stats / name).exists()
        table = pd.read_csv(stats / STATS_FILES["variance"], index_col=0)
        assert "prop_mean" in table.index
        assert "Mean variance per property" in capsys.readouterr().out

    def test_failed_bundles_are_reported(self, cli, tmp_path, capsys, box, cup):
        scene = tmp_path / "scene.txt"
        scene.write_text(render_scene([box, cup]), encoding="utf-8")
        bundles = tmp_path / "bundles"
        run(cli, "simulate", scene, "--out", bundles)
        broken = bundles / sorted(os.listdir(bundles))[0] / "press.log"
        lines = broken.read_text(encoding="utf-8").splitlines()
        broken.write_text("\n".join(["time height", *lines[1:]]) + "\n", encoding="utf-8")

        assert run(cli, "extract", bundles, "--out", tmp_path / "dataset.csv") == 0
        out = capsys.readouterr().out
        assert "1 records" in out
        assert "1 bundle(s) failed" in out


# ---------------------------------------------------------------------------
# Knowledge and Substitution
# ---------------------------------------------------------------------------

class TestKnowledge:
    def test_build_query_round(self, cli, tmp_path, household_csv, capsys):
        kb, queries = tmp_path / "kb.json", tmp_path / "queries.json"
        results, heatmap = tmp_path / "results.json", tmp_path / "heatmap.csv"

        assert run(cli, "build-kb", household_csv, "--out", kb) == 0
        assert json.loads(kb.read_text(encoding="utf-8"))["format"] == "concept-kb/1"

        assert run(cli, "queries", kb, "--out", queries) == 0
        assert len(json.loads(queries.read_text(encoding="utf-8"))["queries"]) == 11

        assert run(cli, "query", kb, queries, "--out", results, "--heatmap", heatmap, "--threshold", 0.5) == 0
        payload = json.loads(results.read_text(encoding="utf-8"))
        assert len(payload["results"]) == 11
        assert all(r["threshold"] == 0.5 for r in payload["results"])
        assert pd.read_csv(heatmap, index_col=0).shape == (11, 11)
        assert "Missing: ball" in capsys.readouterr().out

    def test_kb_is_reproducible(self, cli, tmp_path, household_csv):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        run(cli, "build-kb", household_csv, "--out", first, "--seed", 3)
        run(cli, "build-kb", household_csv, "--out", second, "--seed", 3)
        assert first.read_bytes() == second.read_bytes()

    def test_eta_override(self, cli, tmp_path, household_csv):
        kb = tmp_path / "kb.json"
        assert run(cli, "build-kb", household_csv, "--out", kb, "--eta", 3) == 0
        models = json.loads(kb.read_text(encoding="utf-8"))["cluster_models"]
        assert {body["eta"] for body in models.values()} == {3}

    def test_paths_from_config(self, cli, tmp_path, household_csv):
        config = tmp_path / "run.conf"
        kb = tmp_path / "kb.json"
        config.write_text(f"paths.dataset={household_csv}\npaths.kb={kb}\n", encoding="utf-8")
        assert run(cli, "build-kb", "--config", config) == 0
        assert kb.exists()

    def test_pyramid(self, cli, tmp_path, household_csv):
        out = tmp_path / "pyramid.csv"
        assert run(cli, "pyramid", household_csv, "--out", out, "--k-max", 4) == 0
        frame = pd.read_csv(out)
        assert sorted(frame["k"].unique().tolist()) == [2, 3, 4]
        assert frame.groupby("k")["count"].sum().tolist() == [44, 44, 44]


# ---------------------------------------------------------------------------
# Exit Codes
# ---------------------------------------------------------------------------

class TestExitCodes:
    def test_missing_path_is_config_error(self, cli, capsys):
        assert run(cli, "build-kb") == 2
        assert capsys.readouterr().err.startswith("ERROR E_CONFIG:")

    def test_missing_config_file(self, cli, tmp_path):
        assert run(cli, "stats", "x.csv", "--config", tmp_path / "absent.conf") == 2

    def test_bad_scene(self, cli, tmp_path, capsys):
        scene = tmp_path / "scene.txt"
        scene.write_text("name=cup_01\nclass=cup\n", encoding="utf-8")
        assert run(cli, "simulate", scene, "--out", tmp_path / "bundles") == 3
        assert "E_SCENE_PARSE" in capsys.readouterr().err

    def test_missing_dataset(self, cli, tmp_path):
        assert run(cli, "stats", tmp_path / "absent.csv") == 5

    def test_missing_kb(self, cli, tmp_path):
        assert run(cli, "queries", tmp_path / "absent.json", "--out", tmp_path / "q.json") == 6

    def test_unknown_class(self, cli, tmp_path, household_csv, capsys):
        kb, queries = tmp_path / "kb.json", tmp_path / "q.json"
        run(cli, "build-kb", household_csv, "--out", kb)
        queries.write_text(json.dumps({"missing_class": "zebra", "candidate_classes": ["cup"]}), encoding="utf-8")
        assert run(cli, "query", kb, queries) == 7
        assert capsys.readouterr().err.startswith("ERROR E_UNKNOWN_CLASS:")

    def test_error_is_one_line(self, cli, tmp_path, capsys):
        dataset = tmp_path / "bad.csv"
        dataset.write_text("class,instance\ncup,cup_01\n", encoding="utf-8")
        assert run(cli, "stats", dataset) == 5
        assert len(capsys.readouterr().err.strip().splitlines()) == 1

    @pytest.mark.parametrize("argv", [
        ["stats", "--eta", "x"],
        ["nosuch"],
        ["stats", "--variance", "median"],
        [],
    ])
    def test_bad_arguments_are_config_errors(self, cli, capsys, argv):
        assert run(cli, *argv) == 2
        captured = capsys.readouterr()
        lines = captured.err.strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("ERROR E_CONFIG:")
        assert captured.out == ""

    def test_skip_unknown_queries(self, cli, tmp_path, household_csv, capsys):
        kb, queries = tmp_path / "kb.json", tmp_path / "q.json"
        run(cli, "build-kb", household_csv, "--out", kb)
        queries.write_text(json.dumps([
            {"missing_class": "zebra", "candidate_classes": ["cup"]},
            {"missing_class": "cup", "candidate_classes": ["bowl", "plate"]},
        ]), encoding="utf-8")
        results = tmp_path / "results.json"
        assert run(cli, "query", kb, queries, "--out", results, "--skip-unknown") == 0
        payload = json.loads(results.read_text(encoding="utf-8"))
        assert [r["missing_class"] for r in payload["results"]] == ["cup"]
        assert "1 query(ies) skipped" in capsys.readouterr().out
