"""Majority-consensus band per worker and the pairwise degree of fairness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

# band edges are inclusive; this slack (times M) keeps rounding in the mean and
# SD from pushing an on-edge pair mean outside (two evaluators always sit on the edges)
BAND_TOLERANCE = 1e-9


@dataclass(frozen=True)
class WorkerConsensus:
    worker: str
    mean: float
    sd: float

    @property
    def band(self) -> tuple[float, float]:
        return self.mean - self.sd, self.mean + self.sd


def pair_mean(values: Sequence[float]) -> float:
    """Plain (not time-weighted) mean of one evaluator's values for one worker."""
    if not values:
        raise ValueError("pair mean of an empty sequence")
    return math.fsum(values) / len(values)


def consensus_from_means(worker: str, means: Iterable[float], center: float | None = None) -> WorkerConsensus:
    """Population mean and SD of per-evaluator means.

    ``center`` replaces the mean of means as the band centre (the ``flat``
    consensus mode passes the grand mean of raw values here).
    """
    means = list(means)
    if not means:
        raise ValueError(f"worker {worker!r} has no evaluators")
    mean = sum(means) / len(means) if center is None else center
    sd = math.sqrt(sum((m - mean) ** 2 for m in means) / len(means))
    return WorkerConsensus(worker, mean, sd)


def degree_of_fairness(pmean: float, consensus: WorkerConsensus, scale_max: float, mode: str = "literal") -> float:
    """1 inside the closed band ``mean +- sd``; outside, distance-to-band / M (``literal``)
    or one minus that (``complement``)."""
    if not scale_max > 0:
        raise ValueError("scale_max must be positive")
    lo, hi = consensus.band
    slack = BAND_TOLERANCE * scale_max
    if lo - slack <= pmean <= hi + slack:
        return 1.0
    if pmean < lo:
        dist = (lo - pmean) / scale_max
    else:
        dist = (pmean - hi) / scale_max
    dist = min(dist, 1.0)
    return dist if mode == "literal" else 1.0 - dist
