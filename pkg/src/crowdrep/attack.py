"""Unfair-vote injection, before/after comparison of the three models, and a
seeded synthetic evaluation log."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Optional, Sequence

import numpy as np

from .baselines import adaptive_average, normal_averages
from .engine import compute_all
from .graph import build_graph
from .ingest import INTERVAL_ALIASES, Evaluation, IntervalScheme, label_of
from .trust import EngineConfig

ATTACKER_PREFIX = "atk:"
MODEL_ALIASES = {
    "ours": "ours",
    "ebay": "normal_avg",
    "normal": "normal_avg",
    "normal_avg": "normal_avg",
    "pagerank": "adaptive_avg",
    "adaptive": "adaptive_avg",
    "adaptive_avg": "adaptive_avg",
}
ALL_MODELS = ("ours", "normal_avg", "adaptive_avg")
# 10%-wide buckets up to 100%, then one overflow bucket
BUCKET_EDGES = tuple(i / 10 for i in range(11)) + (math.inf,)


@dataclass
class AttackSpec:
    noise_fraction: float = 0.2
    support_value: float = 3.0
    attack_value: float = 1.0
    threshold: float = 2.0
    seed: int = 0  # recorded for the manifest; injection itself is deterministic
    global_budget: bool = False

    def __post_init__(self):
        if not 0 <= self.noise_fraction <= 1:
            raise ValueError("noise_fraction must lie in [0, 1]")


@dataclass
class ChangeReport:
    model: str
    cohort: str
    rows: list[tuple[str, float, float, float]]  # worker, before, after, rel_change
    counts: list[int]
    mean: float
    sd: float

    @property
    def size(self) -> int:
        return len(self.rows)

    @property
    def fractions(self) -> list[float]:
        return [c / self.size for c in self.counts]

    def fraction_below(self, pct: int = 10) -> float:
        return sum(self.counts[: pct // 10]) / self.size

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "cohort": self.cohort,
            "size": self.size,
            "mean": self.mean,
            "sd": self.sd,
            "fraction_below_10pct": self.fraction_below(10),
            "buckets": [
                {"lo": lo, "hi": None if math.isinf(hi) else hi, "count": c, "fraction": c / self.size}
                for lo, hi, c in zip(BUCKET_EDGES[:-1], BUCKET_EDGES[1:], self.counts)
            ],
        }


def _bucket(rel: float) -> int:
    # round first: |1.8 - 2.0| / 2.0 evaluates to 0.0999...98, which is a 10% change
    return min(int(math.floor(round(rel * 10, 9))), len(BUCKET_EDGES) - 2)


def relative_change(before: float, after: float, scale_max: float) -> float:
    diff = abs(after - before)
    return diff / before if before > 0 else diff / scale_max


def measure_changes(
    before: dict[str, float],
    after: dict[str, float],
    cohort: Iterable[str],
    scale_max: float,
    model: str = "",
    cohort_name: str = "full",
) -> ChangeReport:
    cohort = sorted(cohort)
    if not cohort:
        raise ValueError("cannot measure changes over an empty cohort")
    rows = []
    counts = [0] * (len(BUCKET_EDGES) - 1)
    for w in cohort:
        b, a = before[w], after[w]
        rel = relative_change(b, a, scale_max)
        rows.append((w, b, a, rel))
        counts[_bucket(rel)] += 1
    rels = np.array([r[3] for r in rows])
    return ChangeReport(model, cohort_name, rows, counts, float(rels.mean()), float(rels.std()))


def _per_worker_stats(evals: Sequence[Evaluation]):
    total = defaultdict(float)
    count = defaultdict(int)
    for e in evals:
        total[e.worker] += e.value
        count[e.worker] += 1
    return {w: total[w] / count[w] for w in count}, dict(count)


def injection_counts(counts: dict[str, int], spec: AttackSpec) -> dict[str, int]:
    workers = sorted(counts)
    if not spec.global_budget:
        # round() guards against 0.2*10 evaluating to 2.0000000000000004
        return {w: math.ceil(round(spec.noise_fraction * counts[w], 9)) for w in workers}
    budget = math.ceil(round(spec.noise_fraction * sum(counts.values()), 9))
    base, extra = divmod(budget, len(workers)) if workers else (0, 0)
    return {w: base + (1 if i < extra else 0) for i, w in enumerate(workers)}


def inject_noise(evals: Sequence[Evaluation], spec: AttackSpec, horizon: Optional[int] = None) -> list[Evaluation]:
    """Append unfair votes from fresh identities; original records are kept verbatim.

    Workers whose normal average is below ``threshold`` get ``support_value``
    votes, all others ``attack_value`` votes, stamped at the horizon interval.
    """
    out = list(evals)
    if not evals:
        return out
    averages, counts = _per_worker_stats(evals)
    horizon = horizon or max(e.time_label for e in evals)
    stamp = max(e.timestamp for e in evals)
    for w, n in injection_counts(counts, spec).items():
        value = spec.support_value if averages[w] < spec.threshold else spec.attack_value
        for k in range(n):
            out.append(Evaluation(f"{ATTACKER_PREFIX}{w}:{k}", w, float(value), stamp, horizon, 1.0))
    return out


@dataclass
class ExperimentResult:
    reports: dict[str, dict[str, Optional[ChangeReport]]]
    n_original: int
    n_injected: int
    changed_cohort: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "n_original": self.n_original,
            "n_injected": self.n_injected,
            "changed_cohort_size": len(self.changed_cohort),
            "models": {m: {c: (r.to_json() if r else None) for c, r in by.items()}
                       for m, by in self.reports.items()},
        }


def _model_scores(model, evals, horizon, config, threads, adaptive_kw):
    graph = build_graph(evals, horizon)
    if model == "ours":
        return compute_all(graph, config, threads).rho_map()
    if model == "normal_avg":
        return normal_averages(graph)
    return adaptive_average(graph, config.scale_max, threads=threads, **adaptive_kw).scores


def run_experiment(
    evals: Sequence[Evaluation],
    spec: AttackSpec,
    config: EngineConfig,
    models: Sequence[str] = ALL_MODELS,
    threads: int = 1,
    adaptive_kw: Optional[dict] = None,
) -> ExperimentResult:
    """Score, inject once, rescore; report changes over all workers and over the
    workers whose reputation under our model moved at all."""
    adaptive_kw = adaptive_kw or {}
    models = [MODEL_ALIASES[m] for m in models]
    if not evals:
        raise ValueError("no evaluations")
    horizon = max(e.time_label for e in evals)
    attacked = inject_noise(evals, spec, horizon)
    cohort = sorted({e.worker for e in evals})

    before, after = {}, {}
    for m in models:
        before[m] = _model_scores(m, evals, horizon, config, threads, adaptive_kw)
        after[m] = _model_scores(m, attacked, horizon, config, threads, adaptive_kw)

    changed = []
    if "ours" in models:
        changed = [w for w in cohort if after["ours"][w] != before["ours"][w]]
    reports = {}
    for m in models:
        full = measure_changes(before[m], after[m], cohort, config.scale_max, m, "full")
        sub = measure_changes(before[m], after[m], changed, config.scale_max, m, "changed") if changed else None
        reports[m] = {"full": full, "changed": sub}
    return ExperimentResult(reports, len(evals), len(attacked) - len(evals), changed)


@dataclass
class SyntheticTruth:
    latent: dict[str, float]
    dishonest: list[str]


def generate_synthetic(
    n_workers: int,
    n_evaluators: int,
    n_intervals: int,
    honest_fraction: float,
    seed: int,
    votes_per_worker: int = 10,
    noise_width: float = 0.35,
    epoch: datetime = datetime(2004, 1, 1),
    interval: timedelta = INTERVAL_ALIASES["half-year"],
    return_truth: bool = False,
):
    """Seeded stand-in for a real vote log on the 1..3 scale.

    Each worker has a latent quality uniform in [1, 3] and receives
    ``votes_per_worker`` votes from distinct random evaluators at uniformly
    random times over ``n_intervals`` intervals. Honest evaluators vote the
    latent quality plus Gaussian noise of width ``noise_width``, rounded to
    {1, 2, 3}; dishonest ones vote 1 on workers with latent >= 2 and 3 otherwise.
    """
    if n_workers < 1 or n_evaluators < 1 or n_intervals < 1 or votes_per_worker < 1:
        raise ValueError("sizes must be positive")
    if not 0 <= honest_fraction <= 1:
        raise ValueError("honest_fraction must lie in [0, 1]")
    if noise_width < 0:
        raise ValueError("noise_width must be non-negative")
    rng = np.random.default_rng(seed)
    wd = len(str(n_workers))
    ed = len(str(n_evaluators))
    workers = [f"w{j:0{wd}d}" for j in range(n_workers)]
    evaluators = [f"r{i:0{ed}d}" for i in range(n_evaluators)]
    n_dishonest = int(round((1 - honest_fraction) * n_evaluators))
    dishonest_idx = np.sort(rng.choice(n_evaluators, size=n_dishonest, replace=False))
    dishonest = np.zeros(n_evaluators, dtype=bool)
    dishonest[dishonest_idx] = True
    latent = rng.uniform(1.0, 3.0, size=n_workers)

    scheme = IntervalScheme(interval, epoch)
    span = int((interval * n_intervals).total_seconds())
    k = min(votes_per_worker, n_evaluators)
    evals = []
    for j, w in enumerate(workers):
        voters = rng.choice(n_evaluators, size=k, replace=False)
        offsets = rng.integers(0, span, size=k)
        noise = rng.standard_normal(size=k) * noise_width
        for i, off, eps in zip(voters, offsets, noise):
            if dishonest[i]:
                value = 1.0 if latent[j] >= 2.0 else 3.0
            else:
                value = float(min(max(round(latent[j] + eps), 1), 3))
            ts = epoch + timedelta(seconds=int(off))
            evals.append(Evaluation(evaluators[i], w, value, ts, label_of(ts, scheme), 1.0))
    evals.sort(key=lambda e: (e.timestamp, e.evaluator, e.worker))
    if return_truth:
        truth = SyntheticTruth({w: float(q) for w, q in zip(workers, latent)},
                               [evaluators[i] for i in dishonest_idx])
        return evals, truth
    return evals
