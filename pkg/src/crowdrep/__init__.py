"""Time-discounted, fairness-weighted reputation for crowdsourcing evaluation logs."""

from ._backend import BACKEND
from .attack import AttackSpec, ChangeReport, generate_synthetic, inject_noise, measure_changes, run_experiment
from .baselines import adaptive_average, normal_average, normal_averages
from .engine import EvaluatorFairness, WorkerReputation, compute_all, evaluator_fairness, worker_reputation
from .fairness import WorkerConsensus, degree_of_fairness, pair_mean
from .graph import PairwiseEdge, RelationGraph, build_graph
from .ingest import Evaluation, IntervalScheme, label_of, parse_generic, parse_wikilog
from .trust import EngineConfig, compute_q, trust_rank, trust_weight

__version__ = "0.1.0"
