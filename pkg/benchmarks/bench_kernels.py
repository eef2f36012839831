"""Compare the numba kernel with the numpy fallback on the fixed 4-agent experiment.

    python benchmarks/bench_kernels.py [--runs 50] [--T 1000]
"""

import argparse
import time

import numpy as np

from coopucb import _kernels
from coopucb.bandit import table1_model
from coopucb.graph import complete_graph, erdos_renyi, fig2_graph
from coopucb.sim import ExperimentConfig, draw_streams


def time_backend(cfg, backend, runs):
    args = (cfg.consensus.P, cfg.model.means, cfg.model.sigma_s, cfg.spectral.eps_c, cfg.gamma)
    streams = [draw_streams(np.random.default_rng(s), cfg.T, cfg.M) for s in range(runs)]
    _kernels.simulate(*args, *streams[0], backend=backend)  # warm-up / compile
    out = []
    t0 = time.perf_counter()
    for z, u in streams:
        out.append(_kernels.simulate(*args, z, u, backend=backend)[0])
    return (time.perf_counter() - t0) / runs, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--T", type=int, default=1000)
    a = ap.parse_args()
    model = table1_model()
    cases = {
        "fig2 (M=4)": fig2_graph(),
        "K_10": complete_graph(10),
        "ER M=10": erdos_renyi(10, np.log(10) / 10, seed=0),
    }
    print(f"{'graph':<12} {'numba ms/run':>13} {'numpy ms/run':>13} {'speedup':>8}  choices agree")
    for name, g in cases.items():
        cfg = ExperimentConfig(model, g, T=a.T, runs=a.runs)
        tn, cn = time_backend(cfg, "numba", a.runs)
        tp, cp = time_backend(cfg, "numpy", a.runs)
        same = all(np.array_equal(x, y) for x, y in zip(cn, cp))
        print(f"{name:<12} {1e3 * tn:>13.2f} {1e3 * tp:>13.2f} {tp / tn:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
