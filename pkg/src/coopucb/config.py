"""Experiment configuration files (YAML).

Every key is optional; unknown keys are rejected. Schema and defaults::

    model:
      means: [40, 50, 50, 60, 70, 70, 80, 90, 92, 95]
      sigma_s: 30
    graph:
      kind: fig2            # fig2 | edges | er | complete | path | star
      edges: null           # edge-list file for kind=edges, relative to this file
      M: null               # node count for er/complete/path/star
      rho: null             # er edge probability, a number or "ln(M)/M"
      graphs: 1             # er: number of independent graphs to draw
      seed: 0               # er: seed of graph g is seed + g
      max_attempts: 10000   # er: connectivity rejection cap
    kappa: dmax/(dmax+1)    # number, "dmax/(dmax+1)" or "dmax/(dmax-1)"
    gamma: 1.1
    T: 1000
    runs: 500
    seed: 0                 # run r of graph g uses seed + g*runs + r
    schedule: policy        # policy | round-robin
    init: synchronized      # synchronized | staggered
    reading: dd             # dd | kk
    checkpoints: []
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bandit import TABLE1_MEANS, TABLE1_SIGMA, BanditModel
from .graph import (
    Graph,
    complete_graph,
    erdos_renyi,
    fig2_graph,
    path_graph,
    read_edge_list,
    star_graph,
)
from .sim import ExperimentConfig

__all__ = ["ConfigError", "GraphSource", "ConfigFile", "load_config", "parse_config"]

GRAPH_KINDS = ("fig2", "edges", "er", "complete", "path", "star")
TOP_KEYS = {
    "model", "graph", "kappa", "gamma", "T", "runs", "seed",
    "schedule", "init", "reading", "checkpoints",
}
MODEL_KEYS = {"means", "sigma_s"}
GRAPH_KEYS = {"kind", "edges", "M", "rho", "graphs", "seed", "max_attempts"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSource:
    kind: str = "fig2"
    edges: Path | None = None
    M: int | None = None
    rho: float | None = None
    graphs: int = 1
    seed: int = 0
    max_attempts: int = 10000

    def build(self, index: int = 0) -> Graph:
        if not 0 <= index < self.graphs:
            raise ConfigError(f"graph index {index} out of range (graphs = {self.graphs})")
        if self.kind == "fig2":
            return fig2_graph()
        if self.kind == "edges":
            return read_edge_list(self.edges, M=self.M)
        if self.kind == "er":
            return erdos_renyi(self.M, self.rho, seed=self.seed + index, max_attempts=self.max_attempts)
        return {"complete": complete_graph, "path": path_graph, "star": star_graph}[self.kind](self.M)


@dataclass(frozen=True)
class ConfigFile:
    model: BanditModel = field(default_factory=lambda: BanditModel(TABLE1_MEANS, TABLE1_SIGMA))
    graph: GraphSource = field(default_factory=GraphSource)
    kappa: float | str = "dmax/(dmax+1)"
    gamma: float = 1.1
    T: int = 1000
    runs: int = 500
    seed: int = 0
    schedule: str = "policy"
    init: str = "synchronized"
    reading: str = "dd"
    checkpoints: tuple[int, ...] = ()

    @property
    def n_graphs(self) -> int:
        return self.graph.graphs

    def experiment(self, index: int = 0, **overrides) -> ExperimentConfig:
        params = dict(
            model=self.model,
            graph=self.graph.build(index),
            kappa=self.kappa,
            gamma=self.gamma,
            T=self.T,
            runs=self.runs,
            base_seed=self.seed + index * self.runs,
            schedule=self.schedule,
            init=self.init,
            reading=self.reading,
            checkpoints=self.checkpoints,
        )
        params.update(overrides)
        return ExperimentConfig(**params)


def _check_keys(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(map(str, unknown))}")


def _int(value, name: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _parse_graph(raw: dict, base_dir: Path) -> GraphSource:
    _check_keys(raw, GRAPH_KEYS, "graph")
    kind = raw.get("kind", "fig2")
    if kind not in GRAPH_KINDS:
        raise ConfigError(f"graph.kind must be one of {', '.join(GRAPH_KINDS)}, got {kind!r}")
    M = raw.get("M")
    if M is not None:
        M = _int(M, "graph.M", 1)
    src = dict(kind=kind, M=M)
    if kind == "edges":
        if "edges" not in raw:
            raise ConfigError("graph.kind=edges needs graph.edges")
        src["edges"] = (base_dir / str(raw["edges"])).resolve()
    elif kind in ("er", "complete", "path", "star") and M is None:
        raise ConfigError(f"graph.kind={kind} needs graph.M")
    if kind == "er":
        rho = raw.get("rho")
        if rho is None:
            raise ConfigError("graph.kind=er needs graph.rho")
        if isinstance(rho, str):
            if rho.replace(" ", "") != "ln(M)/M":
                raise ConfigError(f"graph.rho must be a number or 'ln(M)/M', got {rho!r}")
            rho = math.log(M) / M
        src["rho"] = _float(rho, "graph.rho")
        src["graphs"] = _int(raw.get("graphs", 1), "graph.graphs", 1)
        src["seed"] = _int(raw.get("seed", 0), "graph.seed")
        src["max_attempts"] = _int(raw.get("max_attempts", 10000), "graph.max_attempts", 1)
    elif raw.get("graphs", 1) != 1:
        raise ConfigError("graph.graphs > 1 is only meaningful for kind=er")
    return GraphSource(**src)


def parse_config(raw: dict | None, base_dir: str | Path = ".") -> ConfigFile:
    raw = {} if raw is None else raw
    _check_keys(raw, TOP_KEYS, "config")
    out = {}
    if "model" in raw:
        m = raw["model"] or {}
        _check_keys(m, MODEL_KEYS, "model")
        means = m.get("means", list(TABLE1_MEANS))
        if not isinstance(means, list) or not means:
            raise ConfigError("model.means must be a non-empty list")
        try:
            out["model"] = BanditModel(
                tuple(_float(x, "model.means[]") for x in means),
                _float(m.get("sigma_s", TABLE1_SIGMA), "model.sigma_s"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "graph" in raw:
        out["graph"] = _parse_graph(raw["graph"] or {}, Path(base_dir))
    if "kappa" in raw:
        k = raw["kappa"]
        if isinstance(k, str):
            if k.replace(" ", "").lower() not in ("dmax/(dmax+1)", "dmax/(dmax-1)"):
                raise ConfigError(f"kappa rule {k!r} not recognised")
            out["kappa"] = k
        else:
            out["kappa"] = _float(k, "kappa")
            if out["kappa"] <= 0:
                raise ConfigError("kappa must be positive")
    if "gamma" in raw:
        out["gamma"] = _float(raw["gamma"], "gamma")
        if out["gamma"] <= 1:
            raise ConfigError("gamma must be > 1")
    for key in ("T", "runs"):
        if key in raw:
            out[key] = _int(raw[key], key, 1)
    if "seed" in raw:
        out["seed"] = _int(raw["seed"], "seed")
    for key, choices in (
        ("schedule", ("policy", "round-robin")),
        ("init", ("synchronized", "staggered")),
        ("reading", ("dd", "kk")),
    ):
        if key in raw:
            if raw[key] not in choices:
                raise ConfigError(f"{key} must be one of {', '.join(choices)}, got {raw[key]!r}")
            out[key] = raw[key]
    if "checkpoints" in raw:
        cps = raw["checkpoints"] or []
        if not isinstance(cps, list):
            raise ConfigError("checkpoints must be a list")
        out["checkpoints"] = tuple(_int(c, "checkpoints[]", 1) for c in cps)
    cfg = ConfigFile(**out)
    if cfg.T < cfg.model.N:
        raise ConfigError(f"T = {cfg.T} is shorter than the {cfg.model.N} initialization steps")
    return cfg


def load_config(path) -> ConfigFile:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return parse_config(raw, base_dir=path.parent)
