"""Compare the compiled and numpy kernel backends on a synthetic log.

    python benchmarks/bench_kernels.py --workers 10000 --evaluators 7000 --repeat 5
"""

import argparse
import statistics
import time

import numpy as np

from crowdrep import _backend
from crowdrep.attack import generate_synthetic
from crowdrep.baselines import adaptive_average
from crowdrep.engine import annotate, compute_all
from crowdrep.graph import build_graph
from crowdrep.trust import EngineConfig


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times), out


def _kernels_only(graph, config, threads, k):
    ann = annotate(graph, config, threads, k)
    k.worker_aggregate(graph.worker_ptr, graph.worker_edges, ann.tau, ann.omega, ann.phi, threads)
    k.evaluator_aggregate(graph.eval_ptr, ann.omega, ann.phi, threads)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workers", type=int, default=10000)
    p.add_argument("--evaluators", type=int, default=7000)
    p.add_argument("--votes-per-worker", type=int, default=10)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--threads", type=int, nargs="+", default=[1, 4])
    args = p.parse_args()

    evals = generate_synthetic(args.workers, args.evaluators, 8, 0.8, seed=0, votes_per_worker=args.votes_per_worker)
    graph = build_graph(evals)
    config = EngineConfig()
    print(f"{len(evals)} evaluations, {graph.n_edges} edges; backends: {', '.join(sorted(_backend.AVAILABLE))}")
    print(f"{'backend':8s} {'threads':>7s} {'kernels best':>13s} {'compute_all best':>17s} {'median':>9s}"
          f" {'adaptive best':>14s} {'median':>9s}")

    reference = None
    for name in sorted(_backend.AVAILABLE):
        k = _backend.AVAILABLE[name]
        for t in args.threads:
            kb, _, _ = _best(lambda: _kernels_only(graph, config, t, k), args.repeat)
            cb, cm, res = _best(lambda: compute_all(graph, config, t, k), args.repeat)
            ab, am, _ = _best(lambda: adaptive_average(graph, config.scale_max, threads=t, kernels=k), args.repeat)
            rho = np.array([w.rho for w in res.workers])
            if reference is None:
                reference = rho
            drift = float(np.abs(rho - reference).max())
            print(f"{name:8s} {t:7d} {kb * 1e3:11.2f}ms {cb * 1e3:15.2f}ms {cm * 1e3:7.2f}ms {ab * 1e3:12.2f}ms {am * 1e3:7.2f}ms"
                  f"   max |rho diff| {drift:.1e}")


if __name__ == "__main__":
    main()
