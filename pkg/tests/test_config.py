import math
from pathlib import Path

import numpy as np
import pytest

from coopucb.bandit import TABLE1_MEANS
from coopucb.config import ConfigError, load_config, parse_config
from coopucb.graph import fig2_graph

RECIPES = Path(__file__).resolve().parent.parent / "recipes"


class TestDefaults:
    def test_empty(self):
        cfg = parse_config(None)
        assert cfg.model.means == tuple(map(float, TABLE1_MEANS)) and cfg.model.sigma_s == 30
        assert (cfg.gamma, cfg.T, cfg.runs, cfg.seed) == (1.1, 1000, 500, 0)
        assert cfg.kappa == "dmax/(dmax+1)"
        exp = cfg.experiment()
        assert np.array_equal(exp.graph.adjacency, fig2_graph().adjacency)
        assert exp.consensus.kappa == pytest.approx(0.75)

    def test_overrides(self):
        exp = parse_config({"runs": 3}).experiment(T=50)
        assert exp.T == 50 and exp.runs == 3


class TestStrict:
    @pytest.mark.parametrize(
        "raw",
        [
            {"runz": 3},
            {"model": {"mean": [1, 2]}},
            {"graph": {"kind": "fig2", "size": 3}},
        ],
    )
    def test_unknown_keys(self, raw):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(raw)

    @pytest.mark.parametrize(
        "raw",
        [
            {"gamma": 1.0},
            {"T": 0},
            {"T": 5},
            {"runs": 2.5},
            {"runs": True},
            {"kappa": "dmax"},
            {"kappa": -1},
            {"schedule": "random"},
            {"reading": "xx"},
            {"model": {"means": []}},
            {"model": {"sigma_s": 0}},
            {"graph": {"kind": "torus"}},
            {"graph": {"kind": "er", "M": 10}},
            {"graph": {"kind": "er", "M": 10, "rho": "sqrt(M)"}},
            {"graph": {"kind": "path"}},
            {"graph": {"kind": "edges"}},
            {"graph": {"kind": "path", "M": 3, "graphs": 2}},
            {"checkpoints": 5},
            "not a mapping",
        ],
    )
    def test_invalid_values(self, raw):
        with pytest.raises(ConfigError):
            parse_config(raw)


class TestGraphSources:
    def test_er_rho_expression(self):
        cfg = parse_config({"graph": {"kind": "er", "M": 10, "rho": "ln(M)/M", "graphs": 3, "seed": 5}})
        assert cfg.graph.rho == pytest.approx(math.log(10) / 10)
        assert cfg.n_graphs == 3
        g0, g1 = cfg.experiment(0), cfg.experiment(1)
        assert not np.array_equal(g0.graph.adjacency, g1.graph.adjacency)
        assert g1.base_seed == cfg.runs
        with pytest.raises(ConfigError):
            cfg.experiment(3)

    @pytest.mark.parametrize("kind,M,edges", [("complete", 5, 10), ("path", 5, 4), ("star", 5, 4)])
    def test_named(self, kind, M, edges):
        assert parse_config({"graph": {"kind": kind, "M": M}}).experiment().graph.n_edges == edges

    def test_edges_relative_to_file(self, tmp_path):
        (tmp_path / "sub").mkdir()
        (tmp_path / "sub" / "g.edges").write_text("1 2\n2 3\n")
        (tmp_path / "c.yaml").write_text("graph:\n  kind: edges\n  edges: sub/g.edges\nT: 20\n")
        assert load_config(tmp_path / "c.yaml").experiment().M == 3


class TestFiles:
    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.yaml")

    def test_bad_yaml(self, tmp_path):
        f = tmp_path / "c.yaml"
        f.write_text("model: [unclosed\n")
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_config(f)

    @pytest.mark.parametrize("name", ["fig2.yaml", "fig3.yaml", "prop1_path3.yaml"])
    def test_recipes_load(self, name):
        cfg = load_config(RECIPES / name)
        assert cfg.experiment(0).M >= 3

    def test_fig2_recipe(self):
        cfg = load_config(RECIPES / "fig2.yaml")
        assert np.array_equal(cfg.experiment().graph.adjacency, fig2_graph().adjacency)
        assert (cfg.runs, cfg.T) == (500, 1000)
