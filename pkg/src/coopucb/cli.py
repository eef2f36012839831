"""Command-line front end.

    coopucb analyze-graph --edges FILE [--kappa K] [--reading dd|kk] [--out FILE]
    coopucb simulate --config FILE [--out-dir DIR] [--threads N] [--backend numba|numpy]
    coopucb bounds --config FILE [--empirical CSV] [--graph G]

Exit codes: 0 success, 1 invalid input, 2 a runtime invariant failed.
``COOPUCB_OUT_DIR`` sets the default output directory of ``simulate``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from .bandit import fusion_center_lower_bound
from .config import ConfigError, load_config
from .graph import GraphError, build_consensus_matrix, read_edge_list
from .sim import InvariantViolation, run_ensemble, theorem1_bound
from .spectral import spectral_metrics

log = logging.getLogger("coopucb")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INVARIANT = 2

SUMMARY_HEADER = ["agent", "degree", "eps_c", "varsigma", "final_regret", "stderr"]
REGRET_HEADER = ["t", "agent", "mean_regret", "stderr"]
PULLS_HEADER = ["arm", "gap", "group_pulls", "stderr"]
ANALYZE_HEADER = ["agent", "degree", "eps_c", "varsigma", "centralized_equivalent"]


def fmt(x) -> str:
    """Shortest round-tripping decimal; independent of locale."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def analyze_graph_csv(graph, kappa=None, reading: str = "dd") -> str:
    cm = build_consensus_matrix(graph, kappa)
    sm = spectral_metrics(cm, reading)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write(f"# kappa,{fmt(cm.kappa)}\n")
    buf.write(f"# eps_n,{fmt(sm.eps_n)}\n")
    buf.write("# eigenvalues," + ",".join(fmt(x) for x in cm.eigenvalues) + "\n")
    w.writerow(ANALYZE_HEADER)
    for k in range(graph.M):
        w.writerow(
            [k + 1, graph.degrees[k], fmt(sm.eps_c[k]), fmt(sm.varsigma[k]), int(sm.centralized_equivalent[k])]
        )
    return buf.getvalue()


def cmd_analyze_graph(args) -> int:
    graph = read_edge_list(args.edges, M=args.nodes)
    text = analyze_graph_csv(graph, args.kappa, args.reading)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir or os.environ.get("COOPUCB_OUT_DIR") or "coopucb-out")
    multi = cfg.n_graphs > 1
    prefix = ["graph"] if multi else []
    created = not out_dir.exists()
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    done = False
    try:
        regret_rows, summary_rows, pulls_rows = [], [], []
        for g in range(cfg.n_graphs):
            exp = cfg.experiment(g)
            res = run_ensemble(exp, threads=args.threads, backend=args.backend)
            sm = res.spectral
            tag = [g + 1] if multi else []
            for t in range(exp.T):
                for k in range(exp.M):
                    regret_rows.append(tag + [t + 1, k + 1, fmt(res.mean_regret[t, k]), fmt(res.stderr[t, k])])
            for k in range(exp.M):
                summary_rows.append(
                    tag
                    + [k + 1, exp.graph.degrees[k], fmt(sm.eps_c[k]), fmt(sm.varsigma[k]),
                       fmt(res.final_mean[k]), fmt(res.final_stderr[k])]
                )
            gp = res.group_pulls
            se = gp.std(axis=0, ddof=1) / np.sqrt(len(gp)) if len(gp) > 1 else np.zeros(gp.shape[1])
            for i in range(exp.model.N):
                pulls_rows.append(tag + [i + 1, fmt(exp.model.gaps[i]), fmt(gp[:, i].mean()), fmt(se[i])])
            if not multi:
                print(f"kappa={fmt(exp.consensus.kappa)} eps_n={sm.eps_n:.4f} runs={exp.runs} T={exp.T}")
                print("agent  eps_c     final_regret  stderr")
                for k in range(exp.M):
                    print(f"{k + 1:>5}  {sm.eps_c[k]:<8.4f}  {res.final_mean[k]:>12.2f}  {res.final_stderr[k]:.2f}")
                print(f"group  {res.final_mean.sum():>22.2f}")
        _write_csv(staging / "regret.csv", prefix + REGRET_HEADER, regret_rows)
        _write_csv(staging / "summary.csv", prefix + SUMMARY_HEADER, summary_rows)
        _write_csv(staging / "pulls.csv", prefix + PULLS_HEADER, pulls_rows)
        for f in staging.iterdir():
            os.replace(f, out_dir / f.name)
        if multi:
            print(f"{cfg.n_graphs} graphs x {cfg.runs} runs written to {out_dir}")
        else:
            print(f"written to {out_dir}")
        done = True
    finally:
        shutil.rmtree(staging, ignore_errors=True)
        if not done and created:
            shutil.rmtree(out_dir, ignore_errors=True)
    return EXIT_OK


def _read_empirical(path, graph_index: int) -> dict[int, float]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "graph" in rows[0]:
        rows = [r for r in rows if int(r["graph"]) == graph_index + 1]
    try:
        return {int(r["arm"]) - 1: float(r["group_pulls"]) for r in rows}
    except (KeyError, ValueError):
        raise ConfigError(f"{path}: expected columns 'arm' and 'group_pulls'") from None


def bounds_table(cfg, graph_index: int = 0, empirical: dict[int, float] | None = None) -> str:
    exp = cfg.experiment(graph_index)
    arms = exp.model.suboptimal_arms()
    if not arms:
        raise ConfigError("model has no suboptimal arm; nothing to bound")
    header = ["arm", "gap", "theorem1_bound", "fusion_leading", "bound_over_fusion"]
    if empirical is not None:
        header += ["empirical_pulls", "empirical_over_bound"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for arm in arms:
        b = theorem1_bound(exp.model, exp.spectral, exp.M, arm, exp.T, exp.gamma)
        f = fusion_center_lower_bound(exp.model, arm, exp.T)
        row = [arm + 1, fmt(exp.model.gaps[arm]), fmt(b), fmt(f), fmt(b / f) if f > 0 else "inf"]
        if empirical is not None:
            e = empirical.get(arm)
            row += ["", ""] if e is None else [fmt(e), fmt(e / b)]
        w.writerow(row)
    return buf.getvalue()


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    empirical = _read_empirical(args.empirical, args.graph - 1) if args.empirical else None
    sys.stdout.write(bounds_table(cfg, args.graph - 1, empirical))
    return EXIT_OK


def _kappa_arg(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopucb", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze-graph", help="spectral metrics of a graph, as CSV")
    a.add_argument("--edges", required=True, help="edge-list file, one 'u v' pair per line (1-indexed)")
    a.add_argument("--kappa", type=_kappa_arg, default=None, help="step size or rule (default dmax/(dmax+1))")
    a.add_argument("--nodes", type=int, default=None, help="node count, if not implied by the edges")
    a.add_argument("--reading", choices=("dd", "kk"), default="dd")
    a.add_argument("--out", default=None, help="write CSV here instead of stdout")
    a.set_defaults(func=cmd_analyze_graph)

    s = sub.add_parser("simulate", help="Monte Carlo regret experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default=None)
    s.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    s.add_argument("--backend", choices=("numba", "numpy"), default=None)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="regret bound vs fusion-center term per suboptimal arm")
    b.add_argument("--config", required=True)
    b.add_argument("--empirical", default=None, help="pulls.csv written by simulate")
    b.add_argument("--graph", type=int, default=1, help="graph number for multi-graph configs")
    b.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, GraphError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
