from __future__ import annotations

import json

import pytest

from seqdecode import Instance, load_report, save_dataset
from seqdecode.cli import main


@pytest.fixture
def dataset_path(tmp_path):
    path = tmp_path / "data.jsonl"
    save_dataset(
        [
            Instance("a", (0, 1), reference=(0, 0, 0)),
            Instance("b", (1, 0), reference=(0, 0)),
        ],
        path,
    )
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestDecode:
    def test_greedy_decode_writes_report(self, dataset_path, tmp_path):
        out = tmp_path / "report.json"
        code = run(
            "decode", "--dataset", dataset_path, "--algorithm", "greedy",
            "--metric", "occupancy", "--metric-target", 0, "--metric-horizon", 3,
            "--out", out,
        )
        assert code == 0
        report = load_report(out)
        assert {c.instance_id for c in report.cells} == {"a", "b"}

    def test_table_format(self, dataset_path, tmp_path):
        out = tmp_path / "report.txt"
        code = run(
            "decode", "--dataset", dataset_path, "--algorithm", "beam",
            "--budget", 4, "--theta", "1.0", "--out", out, "--format", "table",
        )
        assert code == 0
        assert out.read_text().startswith("budget")


class TestSweep:
    def test_grid_over_algorithms_and_budgets(self, dataset_path, tmp_path):
        out = tmp_path / "sweep.json"
        code = run(
            "sweep", "--dataset", dataset_path,
            "--algorithms", "greedy,mcts", "--budgets", "1,4",
            "--out", out,
        )
        assert code == 0
        report = load_report(out)
        assert set(report.aggregates) == {("greedy", 1), ("greedy", 4), ("mcts", 1), ("mcts", 4)}


class TestOracle:
    def test_writes_exact_baselines(self, dataset_path, tmp_path):
        out = tmp_path / "oracle.json"
        code = run("oracle", "--dataset", dataset_path, "--out", out)
        assert code == 0
        rows = json.loads(out.read_text())
        assert [r["id"] for r in rows] == ["a", "b"]
        assert all("argmax_likelihood" in r and "argmax_metric" in r for r in rows)


class TestTree:
    def test_writes_dot_file(self, dataset_path, tmp_path):
        out = tmp_path / "tree.dot"
        code = run(
            "tree", "--dataset", dataset_path, "--instance-id", "a",
            "--simulations", 3, "--out", out,
        )
        assert code == 0
        text = out.read_text()
        assert text.startswith("digraph mcts {")
        assert text.count("->") == 3


class TestExitCodes:
    def test_configuration_error_is_one(self, dataset_path, tmp_path):
        code = run(
            "decode", "--dataset", dataset_path, "--algorithm", "sample_rerank",
            "--metric", "bleu", "--out", tmp_path / "x.json",
        )
        assert code == 1

    def test_io_error_is_two(self, tmp_path):
        code = run(
            "decode", "--dataset", tmp_path / "missing.jsonl", "--algorithm", "greedy",
            "--out", tmp_path / "x.json",
        )
        assert code == 2
