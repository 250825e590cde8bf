"""Comparison models: plain vote averaging ("eBay") and reputation-weighted
adaptive averaging ("PageRank-style").

The adaptive model iterates, synchronously from ``rep = M/2`` for every actor,

    rep(w) <- sum_v rep(voter_v) * value_v / sum_v rep(voter_v)

over the votes ``v`` received by ``w``. Actors who never receive a vote keep
the prior ``M/2``. This is a vote-valued fixed point, not a stochastic-matrix
PageRank with teleportation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _backend
from .graph import RelationGraph

log = logging.getLogger(__name__)

MODELS = ("normal_avg", "adaptive_avg")


@dataclass(frozen=True)
class BaselineScore:
    actor: str
    model: str
    score: float


@dataclass
class AdaptiveResult:
    scores: dict[str, float]
    iterations: int
    converged: bool


def normal_average(graph: RelationGraph, worker: str) -> float:
    """Mean of every raw value the worker received."""
    edges = graph.edges_of_worker(worker)
    total = 0.0
    n = 0
    for e in edges:
        lo, hi = graph.edge_ptr[e], graph.edge_ptr[e + 1]
        total += float(graph.values[lo:hi].sum())
        n += hi - lo
    return total / n


def normal_averages(graph: RelationGraph) -> dict[str, float]:
    return {w: normal_average(graph, w) for w in graph.worker_ids}


def _votes_by_worker(graph: RelationGraph):
    """Vote-level arrays regrouped so each worker's votes are contiguous (edges in evaluator order)."""
    order = graph.worker_edges
    lengths = np.diff(graph.edge_ptr)[order]
    starts = graph.edge_ptr[:-1][order]
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
    idx = np.arange(lengths.sum()) + offsets
    voter_of_edge = graph.evaluators[graph.edge_evaluator[order]]
    voter = np.repeat(voter_of_edge, lengths).astype(np.int64)
    per_worker = np.add.reduceat(lengths, graph.worker_ptr[:-1]) if len(order) else np.zeros(0, dtype=np.int64)
    vote_ptr = np.zeros(len(graph.workers) + 1, dtype=np.int64)
    np.cumsum(per_worker, out=vote_ptr[1:])
    return vote_ptr, voter, np.ascontiguousarray(graph.values[idx])


def adaptive_average(
    graph: RelationGraph,
    scale_max: float,
    damping: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 100,
    threads: int = 1,
    kernels=None,
) -> AdaptiveResult:
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if graph.n_evaluations == 0:
        raise ValueError("adaptive averaging needs a non-empty graph")
    k = kernels or _backend.kernels
    vote_ptr, voter, values = _votes_by_worker(graph)
    target = np.ascontiguousarray(graph.workers, dtype=np.int64)
    rep = np.full(len(graph.actors), scale_max / 2.0)
    nxt = rep.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        delta = k.adaptive_round(vote_ptr, voter, values, rep, target, nxt, damping, threads)
        rep, nxt = nxt, rep
        nxt[:] = rep
        if delta < tol:
            converged = True
            break
    if not converged:
        log.warning("adaptive averaging did not converge within %d iterations", max_iter)
    scores = {graph.actors[a]: float(rep[a]) for a in graph.workers}
    return AdaptiveResult(scores, it, converged)


def baseline_scores(graph: RelationGraph, scale_max: float, **adaptive_kw) -> list[BaselineScore]:
    out = [BaselineScore(w, "normal_avg", s) for w, s in normal_averages(graph).items()]
    adaptive = adaptive_average(graph, scale_max, **adaptive_kw)
    out += [BaselineScore(w, "adaptive_avg", s) for w, s in adaptive.scores.items()]
    return out
