"""End-to-end tests for the command-line front end."""

import hashlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "engine"))

from config import CONFIG_ENV_VAR
from graph_core import write_edge_list
from main import main
from run_history import RunHistory
from synthetic import two_cliques


@pytest.fixture(autouse=True)
def no_config_env(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


def write_cliques(tmp_path: Path, size: int) -> tuple[Path, Path]:
    """Two joined cliques plus a label file naming each node's clique."""
    graph = two_cliques(size)
    graph_path = tmp_path / "graph.edges"
    graph_path.write_text(write_edge_list(graph))
    labels_path = tmp_path / "labels.txt"
    labels_path.write_text("".join(f"{name} side{int(name) // size}\n" for name in graph.names))
    return graph_path, labels_path


def small_run(graph_path: Path, out: Path, *extra: str) -> list[str]:
    return [
        "--graph", str(graph_path), "--output-dir", str(out),
        "-e", "6", "-r", "4", "-d", "4", "--epochs", "1", *extra,
    ]


def parse_dump(text: str) -> dict[str, list[str]]:
    rows = {}
    for line in text.splitlines():
        if line.startswith("# "):
            continue
        head = line.split(" | ")[0]
        source, _, members = head.partition(": ")
        rows[source] = members.split()
    return rows


class TestNeighborhoods:

    def setup_method(self):
        self.edges = "0 1\n1 2\n"

    def test_chain(self, tmp_path: Path):
        graph_path = tmp_path / "chain.edges"
        graph_path.write_text(self.edges)
        out = tmp_path / "out"
        code = main(["neighborhoods", "--graph", str(graph_path), "-e", "3", "-r", "2", "--output-dir", str(out)])
        assert code == 0

        expanded = parse_dump((out / "expanded.txt").read_text())
        refined = parse_dump((out / "refined.txt").read_text())
        assert list(refined) == ["0", "1", "2"]
        for source, members in refined.items():
            assert members[0] == source
            assert set(members) <= set(expanded[source])
            assert len(members) >= 2

    def test_rerun_is_byte_identical(self, tmp_path: Path):
        graph_path = tmp_path / "chain.edges"
        graph_path.write_text(self.edges)
        args = ["neighborhoods", "--graph", str(graph_path), "-e", "3", "-r", "2"]
        assert main(args + ["--output-dir", str(tmp_path / "a")]) == 0
        assert main(args + ["--output-dir", str(tmp_path / "b")]) == 0
        for name in ("expanded.txt", "refined.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_refinement_larger_than_expansion(self, tmp_path: Path):
        graph_path = tmp_path / "chain.edges"
        graph_path.write_text(self.edges)
        assert main(["neighborhoods", "--graph", str(graph_path), "-e", "2", "-r", "3"]) == 2

    def test_circuit_dump(self, tmp_path: Path):
        graph_path = tmp_path / "chain.edges"
        graph_path.write_text(self.edges)
        dump = tmp_path / "circuits.txt"
        code = main([
            "neighborhoods", "--graph", str(graph_path), "-e", "3", "-r", "2",
            "--output-dir", str(tmp_path / "out"), "--circuit-dump", str(dump),
        ])
        assert code == 0
        assert dump.read_text().count("# circuit") == 3

    def test_malformed_graph(self, tmp_path: Path):
        graph_path = tmp_path / "bad.edges"
        graph_path.write_text("0 1\n1\n")
        assert main(["neighborhoods", "--graph", str(graph_path), "-e", "2", "-r", "1"]) == 2

    def test_invalid_utf8_graph(self, tmp_path: Path):
        graph_path = tmp_path / "bad.edges"
        graph_path.write_bytes(b"0 1\n\xff\xfe 2\n")
        assert main(["neighborhoods", "--graph", str(graph_path)]) == 2

    def test_missing_graph_file_is_io_error(self, tmp_path: Path):
        code = main(["neighborhoods", "--graph", str(tmp_path / "absent.edges"), "-e", "2", "-r", "1"])
        assert code == 3


class TestEmbed:

    def test_zero_epochs_header(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        code = main(["embed", "--graph", str(graph_path), "--output-dir", str(out),
                     "-e", "6", "-r", "4", "-d", "16", "--epochs", "0"])
        assert code == 0
        lines = (out / "embedding.emb").read_text().splitlines()
        assert lines[0] == "20 16"
        assert len(lines) == 21
        assert all(len(line.split()) == 17 for line in lines[1:])

    def test_same_seed_same_bytes(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        assert main(["embed", *small_run(graph_path, tmp_path / "a"), "--seed", "5"]) == 0
        assert main(["embed", *small_run(graph_path, tmp_path / "b"), "--seed", "5"]) == 0
        a = (tmp_path / "a" / "embedding.emb").read_bytes()
        b = (tmp_path / "b" / "embedding.emb").read_bytes()
        assert a == b

    def test_reuses_persisted_neighborhoods(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        assert main(["neighborhoods", *small_run(graph_path, out)]) == 0
        assert main(["embed", *small_run(graph_path, out)]) == 0
        first = (out / "embedding.emb").read_bytes()
        assert main(["embed", *small_run(graph_path, out), "--recompute"]) == 0
        assert (out / "embedding.emb").read_bytes() == first

    def test_corrupt_refined_dump(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        assert main(["neighborhoods", *small_run(graph_path, out)]) == 0
        header = (out / "refined.txt").read_text().splitlines()[0]
        (out / "refined.txt").write_text(header + "\n0 1 2\n")
        assert main(["embed", *small_run(graph_path, out)]) == 2

    def test_stale_neighborhoods_recomputed(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        base = ["--graph", str(graph_path), "--output-dir", str(out)]
        assert main(["neighborhoods", *base, "-e", "3", "-r", "2"]) == 0
        small = parse_dump((out / "refined.txt").read_text())
        assert max(len(members) for members in small.values()) <= 3

        assert main(["embed", *base, "-e", "8", "-r", "6", "-d", "4", "--epochs", "1"]) == 0
        text = (out / "refined.txt").read_text()
        assert text.startswith("# e=8 r=6 ")
        assert all(len(members) >= 6 for members in parse_dump(text).values())

    def test_dump_from_another_graph_recomputed(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        assert main(["neighborhoods", *small_run(graph_path, out)]) == 0
        before = (out / "refined.txt").read_text()
        graph_path.write_text(graph_path.read_text() + "0 19\n")
        assert main(["embed", *small_run(graph_path, out)]) == 0
        after = (out / "refined.txt").read_text()
        assert before.splitlines()[0] != after.splitlines()[0]

    def test_dump_without_header_recomputed(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        out.mkdir()
        (out / "refined.txt").write_text("0: 0 1 | 1 1\n")
        assert main(["embed", *small_run(graph_path, out)]) == 0
        assert len(parse_dump((out / "refined.txt").read_text())) == 20


class TestEvaluate:

    def test_ten_folds(self, tmp_path: Path, capsys):
        graph_path, labels_path = write_cliques(tmp_path, 15)
        out = tmp_path / "out"
        assert main(["embed", *small_run(graph_path, out)]) == 0
        capsys.readouterr()
        code = main(["evaluate", *small_run(graph_path, out), "--labels", str(labels_path), "--folds", "10"])
        assert code == 0
        stdout = capsys.readouterr().out
        assert sum(1 for line in stdout.splitlines() if line.startswith("fold\t")) == 10
        assert "evaluated_nodes\t30" in stdout

    def test_missing_labels(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        assert main(["embed", *small_run(graph_path, out)]) == 0
        code = main(["evaluate", *small_run(graph_path, out), "--labels", str(tmp_path / "none.txt")])
        assert code == 2

    def test_labels_not_configured(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        assert main(["evaluate", *small_run(graph_path, tmp_path / "out")]) == 2

    def test_missing_embedding_is_io_error(self, tmp_path: Path):
        graph_path, labels_path = write_cliques(tmp_path, 10)
        code = main(["evaluate", *small_run(graph_path, tmp_path / "out"), "--labels", str(labels_path)])
        assert code == 3

    def test_non_numeric_embedding(self, tmp_path: Path):
        graph_path, labels_path = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        assert main(["embed", *small_run(graph_path, out)]) == 0
        emb = out / "embedding.emb"
        lines = emb.read_text().splitlines()
        name, *values = lines[1].split()
        lines[1] = " ".join([name, "x", *values[1:]])
        emb.write_text("\n".join(lines) + "\n")
        assert main(["evaluate", *small_run(graph_path, out), "--labels", str(labels_path)]) == 2

    def test_unknown_label_node(self, tmp_path: Path):
        graph_path, labels_path = write_cliques(tmp_path, 10)
        out = tmp_path / "out"
        assert main(["embed", *small_run(graph_path, out)]) == 0
        labels_path.write_text("ghost side0\n")
        assert main(["evaluate", *small_run(graph_path, out), "--labels", str(labels_path)]) == 2


class TestStability:

    def test_single_run_rejected(self, tmp_path: Path):
        graph_path, _ = write_cliques(tmp_path, 10)
        assert main(["stability", *small_run(graph_path, tmp_path / "out"), "--runs", "1"]) == 2

    def test_replay_passes(self, tmp_path: Path, capsys):
        graph_path, labels_path = write_cliques(tmp_path, 10)
        code = main([
            "stability", *small_run(graph_path, tmp_path / "out"),
            "--runs", "2", "--thread-counts", "1,4", "--labels", str(labels_path), "--folds", "4",
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "result\tPASS" in stdout
        assert "micro_f1_spread\t0.000000" in stdout

    def test_varied_seeds_report_deviation(self, tmp_path: Path, capsys):
        graph_path, _ = write_cliques(tmp_path, 10)
        code = main(["stability", *small_run(graph_path, tmp_path / "out"), "--runs", "2", "--vary-seeds"])
        assert code == 0
        stdout = capsys.readouterr().out
        line = next(line for line in stdout.splitlines() if line.startswith("global_max\t"))
        assert float(line.split("\t")[1]) > 0
        assert "result\tFAIL" in stdout


def test_sweep_prints_table(tmp_path: Path, capsys):
    graph_path, labels_path = write_cliques(tmp_path, 10)
    out = tmp_path / "sweep.tsv"
    code = main([
        "sweep", *small_run(graph_path, tmp_path / "o"), "--labels", str(labels_path), "--folds", "4",
        "--param", "log2_dimensions", "--grid", "2,3", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "parameter\tvalue\tmicro_f1\tseconds"
    assert [line.split("\t")[1] for line in lines[1:]] == ["2", "3"]


def test_bad_grid(tmp_path: Path):
    graph_path, labels_path = write_cliques(tmp_path, 10)
    code = main([
        "sweep", *small_run(graph_path, tmp_path / "o"), "--labels", str(labels_path),
        "--param", "dimensions", "--grid", "four",
    ])
    assert code == 2


def test_unknown_subcommand():
    assert main(["bogus"]) == 2


class TestHistory:

    def setup_method(self):
        self.args: list[str] = []

    def record_run(self, tmp_path: Path) -> Path:
        graph_path, _ = write_cliques(tmp_path, 10)
        db = tmp_path / "runs.db"
        self.args = ["--history-db", str(db)]
        assert main(["neighborhoods", *small_run(graph_path, tmp_path / "out"), *self.args]) == 0
        return db

    def test_records_runs(self, tmp_path: Path, capsys):
        db = self.record_run(tmp_path)
        rows = RunHistory(db).list()
        assert len(rows) == 1
        assert rows[0].command == "neighborhoods"
        refined = (tmp_path / "out" / "refined.txt").read_bytes()
        assert rows[0].artifact_sha256 == hashlib.sha256(refined).hexdigest()

        capsys.readouterr()
        assert main(["history", *self.args]) == 0
        assert "\tneighborhoods\t" in capsys.readouterr().out
        assert len(RunHistory(db).list()) == 1

    def test_show_one_run_with_config(self, tmp_path: Path, capsys):
        db = self.record_run(tmp_path)
        run_id = RunHistory(db).list()[0].id
        capsys.readouterr()
        assert main(["history", *self.args, "--id", run_id[:10]]) == 0
        stdout = capsys.readouterr().out
        assert f"id\t{run_id}\n" in stdout
        assert "\nconfig\n" in stdout
        assert "expansion_size=6\n" in stdout

    def test_unknown_id(self, tmp_path: Path):
        self.record_run(tmp_path)
        assert main(["history", *self.args, "--id", "nope"]) == 2

    def test_clear(self, tmp_path: Path, capsys):
        db = self.record_run(tmp_path)
        capsys.readouterr()
        assert main(["history", *self.args, "--clear", "--command", "embed"]) == 0
        assert "cleared\t0" in capsys.readouterr().out
        assert main(["history", *self.args, "--clear"]) == 0
        assert "cleared\t1" in capsys.readouterr().out
        assert RunHistory(db).list() == []

    def test_id_and_clear_exclusive(self, tmp_path: Path):
        self.record_run(tmp_path)
        assert main(["history", *self.args, "--clear", "--id", "x"]) == 2
