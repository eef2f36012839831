import csv
import io
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from coopucb import cli, sim
from coopucb.graph import build_consensus_matrix, complete_graph, fig2_graph, parse_edge_list, star_graph
from coopucb.spectral import spectral_metrics

K4_EDGES = "1 2\n1 3\n1 4\n2 3\n2 4\n3 4\n"
FIG2_EDGES = "1 2\n1 3\n2 3\n3 4\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def parse_analyze(text):
    lines = text.splitlines()
    meta = {l.split(",")[0][2:]: l.split(",")[1:] for l in lines if l.startswith("# ")}
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return meta, rows


def small_config(tmp_path, extra=""):
    write(tmp_path, "g.edges", FIG2_EDGES)
    return write(tmp_path, "c.yaml", f"graph:\n  kind: edges\n  edges: g.edges\nT: 40\nruns: 3\n{extra}")


class TestAnalyzeGraph:
    def test_complete_graph(self, tmp_path, capsys):
        assert cli.main(["analyze-graph", "--edges", str(write(tmp_path, "k4", K4_EDGES)), "--kappa", "0.75"]) == 0
        meta, rows = parse_analyze(capsys.readouterr().out)
        assert float(meta["eps_n"][0]) == 0.0
        assert all(float(r["eps_c"]) == 0.0 and r["varsigma"] == "inf" for r in rows)
        assert all(r["centralized_equivalent"] == "1" for r in rows)

    def test_single_node(self, tmp_path, capsys):
        assert cli.main(["analyze-graph", "--edges", str(write(tmp_path, "one", "# nothing\n"))]) == 0
        meta, rows = parse_analyze(capsys.readouterr().out)
        assert meta["eps_n"] == ["0.0"] and len(rows) == 1

    def test_fig2(self, tmp_path, capsys):
        assert cli.main(["analyze-graph", "--edges", str(write(tmp_path, "f", FIG2_EDGES))]) == 0
        _, rows = parse_analyze(capsys.readouterr().out)
        assert [round(float(r["eps_c"]), 2) for r in rows] == [2.31, 2.31, 0.0, 5.43]
        assert [int(r["degree"]) for r in rows] == [2, 2, 3, 1]

    @pytest.mark.parametrize("graph,reading", [(fig2_graph(), "dd"), (star_graph(5), "kk"), (complete_graph(3), "dd")])
    def test_round_trip_exact(self, graph, reading):
        meta, rows = parse_analyze(cli.analyze_graph_csv(graph, None, reading))
        sm = spectral_metrics(build_consensus_matrix(graph), reading)
        assert float(meta["eps_n"][0]) == sm.eps_n
        assert [float(x) for x in meta["eigenvalues"]] == sm.eigenvalues.tolist()
        assert [float(r["eps_c"]) for r in rows] == sm.eps_c.tolist()
        assert [float(r["varsigma"]) for r in rows] == sm.varsigma.tolist()

    def test_header_golden(self):
        text = cli.analyze_graph_csv(fig2_graph())
        lines = text.splitlines()
        assert lines[0] == "# kappa,0.75"
        assert lines[1].startswith("# eps_n,")
        assert lines[2].startswith("# eigenvalues,")
        assert lines[3] == "agent,degree,eps_c,varsigma,centralized_equivalent"
        assert [l.split(",")[0] for l in lines[4:]] == ["1", "2", "3", "4"]

    def test_out_file(self, tmp_path):
        out = tmp_path / "a.csv"
        assert cli.main(["analyze-graph", "--edges", str(write(tmp_path, "f", FIG2_EDGES)), "--out", str(out)]) == 0
        assert out.read_text() == cli.analyze_graph_csv(parse_edge_list(FIG2_EDGES))

    @pytest.mark.parametrize(
        "edges,args",
        [("1 2\n3 4\n", []), ("1 1\n", []), ("1 2\n", ["--kappa", "1.0"]), ("x y\n", []), (FIG2_EDGES, ["--kappa", "abc"])],
    )
    def test_invalid_exit_1(self, tmp_path, capsys, edges, args):
        assert cli.main(["analyze-graph", "--edges", str(write(tmp_path, "g", edges)), *args]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["analyze-graph", "--edges", str(tmp_path / "none")]) == 1


class TestSimulate:
    def test_outputs(self, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", str(small_config(tmp_path)), "--out-dir", str(out)]) == 0
        with open(out / "regret.csv") as fh:
            reg = list(csv.reader(fh))
        assert reg[0] == ["t", "agent", "mean_regret", "stderr"]
        assert len(reg) == 1 + 40 * 4
        assert [r[:2] for r in reg[1:5]] == [["1", "1"], ["1", "2"], ["1", "3"], ["1", "4"]]
        with open(out / "summary.csv") as fh:
            summ = list(csv.reader(fh))
        assert summ[0] == ["agent", "degree", "eps_c", "varsigma", "final_regret", "stderr"]
        assert len(summ) == 5
        with open(out / "pulls.csv") as fh:
            pulls = list(csv.reader(fh))
        assert pulls[0] == ["arm", "gap", "group_pulls", "stderr"]
        assert sum(float(r[2]) for r in pulls[1:]) == pytest.approx(4 * 40)
        assert not any(p.name.startswith(".staging") for p in out.iterdir())

    def test_init_only_cost(self, tmp_path):
        cfg = small_config(tmp_path).read_text().replace("T: 40", "T: 10").replace("runs: 3", "runs: 1")
        out = tmp_path / "o"
        assert cli.main(["simulate", "--config", str(write(tmp_path, "c2.yaml", cfg)), "--out-dir", str(out)]) == 0
        with open(out / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert all(float(r["final_regret"]) == 253.0 for r in rows)

    def test_threads_identical(self, tmp_path):
        cfg = small_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["simulate", "--config", str(cfg), "--out-dir", str(a), "--threads", "1"]) == 0
        assert cli.main(["simulate", "--config", str(cfg), "--out-dir", str(b), "--threads", "3"]) == 0
        for name in ("regret.csv", "summary.csv", "pulls.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("COOPUCB_OUT_DIR", str(tmp_path / "env"))
        assert cli.main(["simulate", "--config", str(small_config(tmp_path))]) == 0
        assert (tmp_path / "env" / "summary.csv").exists()

    def test_multi_graph(self, tmp_path):
        cfg = write(tmp_path, "er.yaml", "graph:\n  kind: er\n  M: 5\n  rho: 0.6\n  graphs: 2\nT: 20\nruns: 2\n")
        out = tmp_path / "er"
        assert cli.main(["simulate", "--config", str(cfg), "--out-dir", str(out)]) == 0
        with open(out / "summary.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "graph" and len(rows) == 1 + 2 * 5
        assert {r[0] for r in rows[1:]} == {"1", "2"}

    def test_bad_config_exit_1(self, tmp_path):
        out = tmp_path / "x"
        assert cli.main(["simulate", "--config", str(write(tmp_path, "b.yaml", "foo: 1\n")), "--out-dir", str(out)]) == 1
        assert not out.exists()

    def test_invariant_exit_2_cleans_up(self, tmp_path, monkeypatch, capsys):
        real = sim.spectral_metrics
        monkeypatch.setattr(sim, "spectral_metrics", lambda cm, reading="dd": replace(real(cm, reading), eps_n=0.0))
        out = tmp_path / "bad"
        assert cli.main(["simulate", "--config", str(small_config(tmp_path)), "--out-dir", str(out)]) == 2
        assert "invariant" in capsys.readouterr().err
        assert not out.exists()

    def test_existing_dir_kept_on_failure(self, tmp_path, monkeypatch):
        real = sim.spectral_metrics
        monkeypatch.setattr(sim, "spectral_metrics", lambda cm, reading="dd": replace(real(cm, reading), eps_n=0.0))
        out = tmp_path / "keep"
        out.mkdir()
        (out / "old.txt").write_text("x")
        assert cli.main(["simulate", "--config", str(small_config(tmp_path)), "--out-dir", str(out)]) == 2
        assert [p.name for p in out.iterdir()] == ["old.txt"]


class TestBounds:
    def test_single_agent_table(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.yaml", "graph:\n  kind: edges\n  edges: one.edges\n")
        write(tmp_path, "one.edges", "")
        assert cli.main(["bounds", "--config", str(cfg)]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert list(rows[0]) == ["arm", "gap", "theorem1_bound", "fusion_leading", "bound_over_fusion"]
        assert [r["arm"] for r in rows] == [str(i) for i in range(1, 10)]
        arm8 = rows[7]
        assert float(arm8["gap"]) == 5.0
        assert float(arm8["theorem1_bound"]) == pytest.approx(2200)
        assert float(arm8["fusion_leading"]) == pytest.approx(72 * math.log(1000))

    def test_ratio_approaches_4gamma(self, tmp_path):
        write(tmp_path, "one.edges", "")

        def ratios(T, gamma):
            text = f"graph:\n  kind: edges\n  edges: one.edges\nT: {T}\ngamma: {gamma}\n"
            cfg = cli.load_config(write(tmp_path, "c.yaml", text))
            rows = list(csv.DictReader(io.StringIO(cli.bounds_table(cfg))))
            return {float(r["gap"]): float(r["bound_over_fusion"]) for r in rows}

        for gamma in (1.1, 2.0):
            r6, r12 = ratios(10**6, gamma), ratios(10**12, gamma)
            for gap in (3.0, 5.0):
                assert r6[gap] == pytest.approx(4 * gamma, rel=0.02)
            # the additive constant fades more slowly for easy arms, but every ratio moves toward 4 gamma
            for gap in r6:
                assert abs(r12[gap] - 4 * gamma) < abs(r6[gap] - 4 * gamma)

    def test_gamma_larger_bound(self, tmp_path):
        write(tmp_path, "one.edges", "")
        b = {}
        for gamma in (1.1, 2.0):
            cfg = cli.load_config(write(tmp_path, "c.yaml", f"graph:\n  kind: edges\n  edges: one.edges\ngamma: {gamma}\n"))
            b[gamma] = [float(r["theorem1_bound"]) for r in csv.DictReader(io.StringIO(cli.bounds_table(cfg)))]
        assert all(y > x for x, y in zip(b[1.1], b[2.0]))

    def test_with_empirical(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        out = tmp_path / "o"
        assert cli.main(["simulate", "--config", str(cfg), "--out-dir", str(out)]) == 0
        capsys.readouterr()
        assert cli.main(["bounds", "--config", str(cfg), "--empirical", str(out / "pulls.csv")]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert "empirical_over_bound" in rows[0]
        assert all(float(r["empirical_over_bound"]) < 1 for r in rows)

    def test_single_arm_exit_1(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.yaml", "model:\n  means: [1.0]\n  sigma_s: 1\n")
        assert cli.main(["bounds", "--config", str(cfg)]) == 1
        assert "no suboptimal arm" in capsys.readouterr().err

    def test_bad_empirical(self, tmp_path):
        cfg = small_config(tmp_path)
        bad = write(tmp_path, "bad.csv", "a,b\n1,2\n")
        assert cli.main(["bounds", "--config", str(cfg), "--empirical", str(bad)]) == 1


def test_fmt_locale_free():
    assert cli.fmt(0.1) == "0.1" and cli.fmt(np.int64(3)) == "3" and cli.fmt(float("inf")) == "inf"


def test_module_entry():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "coopucb", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "analyze-graph" in r.stdout
