"""Directed evaluator -> worker relation graph.

Edges are stored in flat, segment-indexed numpy arrays:

* edges are ordered by ``(evaluator id, worker id)``; edge ``e`` owns the
  evaluations ``edge_ptr[e]:edge_ptr[e+1]`` of ``labels``/``values``/``credits``,
  sorted by time label (ties broken by timestamp, value, credit, so the
  layout does not depend on input order);
* evaluator ``i`` owns the contiguous edge range ``eval_ptr[i]:eval_ptr[i+1]``;
* worker ``j`` owns ``worker_edges[worker_ptr[j]:worker_ptr[j+1]]``, which
  lists its edges by evaluator id.

Every reduction downstream follows these orders, so sums are bit-stable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .ingest import Evaluation

_EPOCH = datetime(1970, 1, 1)


@dataclass
class PairwiseEdge:
    evaluator: str
    worker: str
    sequence: list[tuple[int, float, float]]  # (time label, value, credit)
    tau: Optional[float] = None
    omega: Optional[float] = None
    phi: Optional[float] = None

    @property
    def values(self) -> list[float]:
        return [v for _, v, _ in self.sequence]


@dataclass
class RelationGraph:
    actors: list[str]
    evaluators: np.ndarray  # actor index per evaluator slot
    workers: np.ndarray  # actor index per worker slot
    edge_evaluator: np.ndarray  # evaluator slot per edge
    edge_worker: np.ndarray  # worker slot per edge
    edge_ptr: np.ndarray
    eval_ptr: np.ndarray
    worker_ptr: np.ndarray
    worker_edges: np.ndarray
    labels: np.ndarray
    values: np.ndarray
    credits: np.ndarray
    horizon: int
    _actor_index: dict = field(default_factory=dict, repr=False)
    _eval_slot: dict = field(default_factory=dict, repr=False)
    _worker_slot: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._actor_index = {a: i for i, a in enumerate(self.actors)}
        self._eval_slot = {self.actors[a]: s for s, a in enumerate(self.evaluators)}
        self._worker_slot = {self.actors[a]: s for s, a in enumerate(self.workers)}

    @property
    def n_edges(self) -> int:
        return len(self.edge_evaluator)

    @property
    def n_evaluations(self) -> int:
        return len(self.values)

    @property
    def evaluator_ids(self) -> list[str]:
        return [self.actors[a] for a in self.evaluators]

    @property
    def worker_ids(self) -> list[str]:
        return [self.actors[a] for a in self.workers]

    def roles(self, actor: str) -> dict[str, bool]:
        return {"is_evaluator": actor in self._eval_slot, "is_worker": actor in self._worker_slot}

    def worker_slot(self, worker: str) -> int:
        try:
            return self._worker_slot[worker]
        except KeyError:
            raise KeyError(f"unknown worker {worker!r}") from None

    def evaluator_slot(self, evaluator: str) -> int:
        try:
            return self._eval_slot[evaluator]
        except KeyError:
            raise KeyError(f"unknown evaluator {evaluator!r}") from None

    def edges_of_worker(self, worker: str) -> np.ndarray:
        j = self.worker_slot(worker)
        return self.worker_edges[self.worker_ptr[j]:self.worker_ptr[j + 1]]

    def edges_of_evaluator(self, evaluator: str) -> np.ndarray:
        i = self.evaluator_slot(evaluator)
        return np.arange(self.eval_ptr[i], self.eval_ptr[i + 1])

    def evaluators_of(self, worker: str) -> list[str]:
        """D_j: evaluators who assessed ``worker``."""
        return [self.actors[self.evaluators[self.edge_evaluator[e]]] for e in self.edges_of_worker(worker)]

    def workers_of(self, evaluator: str) -> list[str]:
        """S_i: workers assessed by ``evaluator``."""
        return [self.actors[self.workers[self.edge_worker[e]]] for e in self.edges_of_evaluator(evaluator)]

    def edge_index(self, evaluator: str, worker: str) -> int:
        i = self.evaluator_slot(evaluator)
        j = self.worker_slot(worker)
        lo, hi = self.eval_ptr[i], self.eval_ptr[i + 1]
        k = lo + int(np.searchsorted(self.edge_worker[lo:hi], j))
        if k >= hi or self.edge_worker[k] != j:
            raise KeyError(f"no edge {evaluator!r} -> {worker!r}")
        return k

    def edge(self, evaluator: str, worker: str) -> PairwiseEdge:
        return self.edge_at(self.edge_index(evaluator, worker))

    def edge_at(self, e: int) -> PairwiseEdge:
        lo, hi = self.edge_ptr[e], self.edge_ptr[e + 1]
        seq = [(int(l), float(v), float(c)) for l, v, c in
               zip(self.labels[lo:hi], self.values[lo:hi], self.credits[lo:hi])]
        return PairwiseEdge(self.actors[self.evaluators[self.edge_evaluator[e]]],
                            self.actors[self.workers[self.edge_worker[e]]], seq)

    def iter_edges(self):
        for e in range(self.n_edges):
            yield self.edge_at(e)

    def dump_csv(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["evaluator", "worker", "n_evals", "first_label", "last_label"])
        for e in range(self.n_edges):
            lo, hi = self.edge_ptr[e], self.edge_ptr[e + 1]
            w.writerow([self.actors[self.evaluators[self.edge_evaluator[e]]],
                        self.actors[self.workers[self.edge_worker[e]]],
                        hi - lo, self.labels[lo], self.labels[hi - 1]])


def _segments(keys: np.ndarray, n: int) -> np.ndarray:
    """CSR pointer for sorted integer ``keys`` in ``0..n-1``."""
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return ptr


def build_graph(evals: Sequence[Evaluation], horizon: Optional[int] = None) -> RelationGraph:
    """Group evaluations by ``(evaluator, worker)`` pair; ``horizon`` defaults to the newest label."""
    n = len(evals)
    max_label = max((e.time_label for e in evals), default=0)
    if horizon is None:
        horizon = max(max_label, 1)
    if horizon < max_label:
        raise ValueError(f"horizon {horizon} precedes newest evaluation label {max_label}")

    actors = sorted({e.evaluator for e in evals} | {e.worker for e in evals})
    index = {a: i for i, a in enumerate(actors)}
    ev_actor = np.fromiter((index[e.evaluator] for e in evals), dtype=np.int64, count=n)
    wk_actor = np.fromiter((index[e.worker] for e in evals), dtype=np.int64, count=n)
    labels = np.fromiter((e.time_label for e in evals), dtype=np.int64, count=n)
    values = np.fromiter((e.value for e in evals), dtype=np.float64, count=n)
    credits = np.fromiter((e.credit for e in evals), dtype=np.float64, count=n)
    stamps = np.fromiter(((e.timestamp - _EPOCH).total_seconds() for e in evals), dtype=np.float64, count=n)

    order = np.lexsort((credits, values, stamps, labels, wk_actor, ev_actor))
    ev_actor, wk_actor = ev_actor[order], wk_actor[order]
    labels, values, credits = labels[order], values[order], credits[order]

    evaluators = np.unique(ev_actor)
    workers = np.unique(wk_actor)
    ev_slot = np.searchsorted(evaluators, ev_actor)
    wk_slot = np.searchsorted(workers, wk_actor)

    if n:
        new_edge = np.ones(n, dtype=bool)
        new_edge[1:] = (ev_slot[1:] != ev_slot[:-1]) | (wk_slot[1:] != wk_slot[:-1])
        starts = np.flatnonzero(new_edge)
    else:
        starts = np.zeros(0, dtype=np.int64)
    edge_ptr = np.append(starts, n).astype(np.int64)
    edge_evaluator = ev_slot[starts]
    edge_worker = wk_slot[starts]

    eval_ptr = _segments(edge_evaluator, len(evaluators))
    worker_edges = np.lexsort((edge_evaluator, edge_worker)).astype(np.int64)
    worker_ptr = _segments(edge_worker, len(workers))

    return RelationGraph(
        actors=actors,
        evaluators=evaluators.astype(np.int64),
        workers=workers.astype(np.int64),
        edge_evaluator=edge_evaluator.astype(np.int64),
        edge_worker=edge_worker.astype(np.int64),
        edge_ptr=edge_ptr,
        eval_ptr=eval_ptr,
        worker_ptr=worker_ptr,
        worker_edges=worker_edges,
        labels=labels,
        values=values,
        credits=credits,
        horizon=int(horizon),
    )


def filter_as_of(evals: Iterable[Evaluation], horizon: int) -> list[Evaluation]:
    return [e for e in evals if e.time_label <= horizon]
