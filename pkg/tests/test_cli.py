"""Tests for the command line interface."""

import json

import pytest

from spamflow.cli import main
from spamflow.synth import SynthConfig, generate_dataset


def synth_args(out_dir, neighborhoods=1, seed=1):
    return [
        "synth",
        "--out-dir",
        str(out_dir),
        "--neighborhoods",
        str(neighborhoods),
        "--communities",
        "3",
        "--community-size",
        "12",
        "--p-in",
        "0.8",
        "--p-out",
        "0.02",
        "--topics",
        "6",
        "--vocab",
        "60",
        "--docs-per-user",
        "1",
        "--benign-groups",
        "14",
        "--spam-groups",
        "14",
        "--min-group-size",
        "4",
        "--max-group-size",
        "10",
        "--seed",
        str(seed),
    ]


def run_args(data_dir, output_dir, **extra):
    args = [
        "run",
        "--data-dir",
        str(data_dir),
        "--output-dir",
        str(output_dir),
        "--length",
        "10",
        "--topics",
        "20",
        "--iterations",
        "60",
        "--restarts",
        "3",
        "--seed",
        "0",
    ]
    for key, value in extra.items():
        args.extend([f"--{key.replace('_', '-')}", str(value)])
    return args


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    out = root / "out"
    assert main(synth_args(data, neighborhoods=2)) == 0
    assert main(run_args(data, out)) == 0
    return data, out


class TestExitCodes:
    def test_usage_error_is_config_error(self, capsys):
        assert main(["run"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_unknown_command_rejected(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code = main(
            [
                "ingest",
                "--timelines",
                str(tmp_path / "absent.jsonl"),
                "--out-documents",
                str(tmp_path / "docs.jsonl"),
            ]
        )
        assert code == 2
        assert "data error" in capsys.readouterr().err

    def test_bad_config_file_key(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps({"data_dir": "d", "output_dir": "o", "bogus": 1}),
            encoding="utf-8",
        )
        assert main(["run", "--config", str(config)]) == 1

    def test_value_error_in_fractions(self, tmp_path, capsys):
        code = main(
            [
                "simulate-attack",
                "--kind",
                "poisoning",
                "--observations",
                "x",
                "--community-topics",
                "x",
                "--labels",
                "x",
                "--out-curve",
                str(tmp_path / "c.csv"),
                "--fractions",
                "0.1,zebra",
            ]
        )
        assert code == 1


class TestSynthCommand:
    def test_writes_dataset(self, tmp_path, capsys):
        assert main(synth_args(tmp_path / "data")) == 0
        assert "wrote 1 neighborhoods" in capsys.readouterr().out
        assert (tmp_path / "data" / "n000" / "timelines.jsonl").exists()

    def test_invalid_probabilities_rejected(self, tmp_path, capsys):
        args = synth_args(tmp_path / "data")
        args[args.index("--p-in") + 1] = "0.01"
        args[args.index("--p-out") + 1] = "0.5"
        assert main(args) == 1


class TestRunCommand:
    def test_full_run_output(self, cli_run, capsys):
        data, out = cli_run
        assert (out / "report.json").exists()
        assert (out / "manifest.json").exists()
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["evaluated"] == ["n000", "n001"]

    def test_run_prints_metrics(self, cli_run, tmp_path, capsys):
        data, _ = cli_run
        out = tmp_path / "fresh"
        assert main(run_args(data, out)) == 0
        stdout = capsys.readouterr().out
        assert "n000: precision=" in stdout
        assert "average over 2 neighborhoods" in stdout
        assert "report written to" in stdout

    def test_determinism_byte_identical(self, cli_run, tmp_path):
        data, _ = cli_run
        out = tmp_path / "again"
        assert main(run_args(data, out)) == 0
        snapshot = {
            p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()
        }
        assert main(run_args(data, out)) == 0
        current = {
            p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()
        }
        assert current == snapshot


class TestStageCommands:
    def test_ingest(self, cli_run, tmp_path, capsys):
        data, _ = cli_run
        out_docs = tmp_path / "docs.jsonl"
        code = main(
            [
                "ingest",
                "--timelines",
                str(data / "n000" / "timelines.jsonl"),
                "--out-documents",
                str(out_docs),
                "--length",
                "10",
            ]
        )
        assert code == 0
        assert out_docs.exists()
        assert "documents" in capsys.readouterr().out

    def test_graph(self, cli_run, tmp_path, capsys):
        data, _ = cli_run
        out_partition = tmp_path / "partition.csv"
        code = main(
            [
                "graph",
                "--edges",
                str(data / "n000" / "edges.tsv"),
                "--out-partition",
                str(out_partition),
                "--restarts",
                "3",
            ]
        )
        assert code == 0
        assert out_partition.exists()
        assert "communities" in capsys.readouterr().out

    def test_groups(self, cli_run, tmp_path, capsys):
        data, _ = cli_run
        out_groups = tmp_path / "groups.csv"
        code = main(
            [
                "groups",
                "--timelines",
                str(data / "n000" / "timelines.jsonl"),
                "--out-groups",
                str(out_groups),
            ]
        )
        assert code == 0
        assert "28 groups" in capsys.readouterr().out

    def test_topics_poi_train_chain(self, cli_run, tmp_path, capsys):
        data, out = cli_run
        model = tmp_path / "model.txt"
        doc_labels = tmp_path / "doc_labels.csv"
        community_topics = tmp_path / "community_topics.csv"
        code = main(
            [
                "topics",
                "--documents",
                str(out / "n000" / "documents.jsonl"),
                "--partition",
                str(out / "n000" / "partition.csv"),
                "--out-model",
                str(model),
                "--out-doc-labels",
                str(doc_labels),
                "--out-community-topics",
                str(community_topics),
                "--topics",
                "20",
                "--iterations",
                "60",
            ]
        )
        assert code == 0
        table = tmp_path / "table.csv"
        observations = tmp_path / "observations.csv"
        code = main(
            [
                "poi",
                "--timelines",
                str(data / "n000" / "timelines.jsonl"),
                "--groups",
                str(out / "n000" / "groups.csv"),
                "--partition",
                str(out / "n000" / "partition.csv"),
                "--community-topics",
                str(community_topics),
                "--neighborhood",
                "n000",
                "--out-table",
                str(table),
                "--out-observations",
                str(observations),
            ]
        )
        assert code == 0
        assert "28 rows" in capsys.readouterr().out
        report_path = tmp_path / "cv.json"
        code = main(
            [
                "train",
                "--table",
                str(table),
                "--labels",
                str(data / "n000" / "labels.csv"),
                "--neighborhood",
                "n000",
                "--out-report",
                str(report_path),
            ]
        )
        assert code == 0
        assert "10-fold CV" in capsys.readouterr().out
        record = json.loads(report_path.read_text(encoding="utf-8"))
        assert set(record) >= {"accuracy", "precision", "recall", "f1"}

    def test_validate_h1(self, cli_run, tmp_path, capsys):
        data, out = cli_run
        report_path = tmp_path / "h1.csv"
        code = main(
            [
                "validate-h1",
                "--data-dir",
                str(data),
                "--output-dir",
                str(out),
                "--out-report",
                str(report_path),
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "homogeneity actual=" in stdout
        assert report_path.exists()

    def test_simulate_attack(self, cli_run, tmp_path, capsys):
        data, out = cli_run
        curve_path = tmp_path / "curve.csv"
        code = main(
            [
                "simulate-attack",
                "--kind",
                "poisoning",
                "--observations",
                str(out / "n000" / "observations.csv"),
                "--community-topics",
                str(out / "n000" / "community_topics.csv"),
                "--labels",
                str(data / "n000" / "labels.csv"),
                "--neighborhood",
                "n000",
                "--out-curve",
                str(curve_path),
                "--fractions",
                "0.0,1.0",
                "--reps",
                "2",
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "poisoning fraction=0.0" in stdout
        assert curve_path.exists()

    def test_simulate_early(self, cli_run, tmp_path, capsys):
        data, out = cli_run
        curve_path = tmp_path / "early.csv"
        code = main(
            [
                "simulate-early",
                "--observations",
                str(out / "n000" / "observations.csv"),
                "--community-topics",
                str(out / "n000" / "community_topics.csv"),
                "--labels",
                str(data / "n000" / "labels.csv"),
                "--neighborhood",
                "n000",
                "--out-curve",
                str(curve_path),
                "--reps",
                "1",
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "fraction=0.1" in stdout
        assert "fraction=1.0" in stdout
        assert curve_path.exists()
