"""Worker reputation and evaluator fairness over an annotated relation graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .fairness import BAND_TOLERANCE, WorkerConsensus
from .graph import PairwiseEdge, RelationGraph
from .trust import EngineConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WorkerReputation:
    worker: str
    rho: float
    weight: float
    degenerate: bool = False


@dataclass(frozen=True)
class EvaluatorFairness:
    evaluator: str
    gamma: float
    weight: float


@dataclass
class EdgeAnnotations:
    """Per-edge tau/omega/phi plus the per-worker consensus they were derived from."""

    graph: RelationGraph
    tau: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    pair_mean: np.ndarray
    consensus_mean: np.ndarray
    consensus_sd: np.ndarray

    def edge(self, evaluator: str, worker: str) -> PairwiseEdge:
        e = self.graph.edge_index(evaluator, worker)
        edge = self.graph.edge_at(e)
        edge.tau, edge.omega, edge.phi = float(self.tau[e]), float(self.omega[e]), float(self.phi[e])
        return edge

    def consensus(self, worker: str) -> WorkerConsensus:
        j = self.graph.worker_slot(worker)
        return WorkerConsensus(worker, float(self.consensus_mean[j]), float(self.consensus_sd[j]))


@dataclass
class ReputationResult:
    annotations: EdgeAnnotations
    workers: list[WorkerReputation]
    evaluators: list[EvaluatorFairness]

    @property
    def graph(self) -> RelationGraph:
        return self.annotations.graph

    def worker(self, worker: str) -> WorkerReputation:
        return self.workers[self.graph.worker_slot(worker)]

    def evaluator(self, evaluator: str) -> EvaluatorFairness:
        return self.evaluators[self.graph.evaluator_slot(evaluator)]

    def rho_map(self) -> dict[str, float]:
        return {w.worker: w.rho for w in self.workers}


def annotate(graph: RelationGraph, config: EngineConfig, threads: int = 1, kernels=None) -> EdgeAnnotations:
    k = kernels or _backend.kernels
    h = config.h
    hcredits = graph.credits if config.credit_fn == "identity" else np.array([h(c) for c in graph.credits])
    tau, omega, pmean, vsum, cnt = k.edge_stats(
        graph.edge_ptr, graph.labels, graph.values, np.ascontiguousarray(hcredits, dtype=np.float64),
        config.q, graph.horizon, threads)
    mean, sd = k.worker_consensus(graph.worker_ptr, graph.worker_edges, pmean, vsum, cnt,
                                  config.consensus == "flat", threads)
    phi = k.fairness(pmean, graph.edge_worker, mean, sd, config.scale_max,
                     config.fairness == "complement", BAND_TOLERANCE, threads)
    return EdgeAnnotations(graph, tau, omega, phi, pmean, mean, sd)


def compute_all(graph: RelationGraph, config: EngineConfig, threads: int = 1, kernels=None) -> ReputationResult:
    """Annotate every edge, then aggregate one reputation per worker and one fairness rank per evaluator."""
    k = kernels or _backend.kernels
    ann = annotate(graph, config, threads, k)
    rho, weight, degen = k.worker_aggregate(graph.worker_ptr, graph.worker_edges, ann.tau, ann.omega, ann.phi, threads)
    gamma, psi = k.evaluator_aggregate(graph.eval_ptr, ann.omega, ann.phi, threads)
    workers = [WorkerReputation(w, float(r), float(wt), bool(d))
               for w, r, wt, d in zip(graph.worker_ids, rho, weight, degen)]
    evaluators = [EvaluatorFairness(e, float(g), float(p)) for e, g, p in zip(graph.evaluator_ids, gamma, psi)]
    n_degen = int(np.count_nonzero(degen))
    if n_degen:
        log.warning("%d worker(s) have zero total fairness weight; reported as degenerate (0, 0)", n_degen)
    return ReputationResult(ann, workers, evaluators)


def worker_reputation(ann: EdgeAnnotations, worker: str) -> WorkerReputation:
    """Single-worker query over annotated edges (plain loop, no kernels)."""
    num = den = 0.0
    taus = []
    for e in ann.graph.edges_of_worker(worker):
        wt = ann.omega[e] * ann.phi[e]
        num += wt * ann.tau[e]
        den += wt
        taus.append(ann.tau[e])
    if den == 0.0:
        return WorkerReputation(worker, 0.0, 0.0, True)
    return WorkerReputation(worker, float(min(max(num / den, min(taus)), max(taus))), float(den))


def evaluator_fairness(ann: EdgeAnnotations, evaluator: str) -> EvaluatorFairness:
    num = den = 0.0
    phis = []
    for e in ann.graph.edges_of_evaluator(evaluator):
        num += ann.omega[e] * ann.phi[e]
        den += ann.omega[e]
        phis.append(ann.phi[e])
    return EvaluatorFairness(evaluator, float(min(max(num / den, min(phis)), max(phis))), float(den))


def result_to_json(result: ReputationResult, config: Optional[EngineConfig] = None) -> dict:
    """Combined report keyed by actor id; floats at full precision."""
    out = {
        "horizon": result.graph.horizon,
        "workers": {w.worker: {"rho": w.rho, "weight": w.weight, "degenerate": w.degenerate}
                    for w in result.workers},
        "evaluators": {e.evaluator: {"gamma": e.gamma, "weight": e.weight} for e in result.evaluators},
    }
    if config is not None:
        out["config"] = config.echo()
    return out
