import math
from collections import Counter

import pytest

from conftest import ev
from crowdrep.attack import (
    ATTACKER_PREFIX,
    AttackSpec,
    BUCKET_EDGES,
    generate_synthetic,
    inject_noise,
    injection_counts,
    measure_changes,
    relative_change,
    run_experiment,
)
from crowdrep.baselines import normal_averages
from crowdrep.graph import build_graph
from crowdrep.trust import EngineConfig


def _worker_with(values, worker="w", label=3):
    return [ev(f"r{k}", worker, v, label) for k, v in enumerate(values)]


def _injected(evals, out):
    return out[len(evals):]


def test_attack_votes_for_above_threshold_worker():
    evals = _worker_with([3, 2] * 5)  # average 2.5
    out = inject_noise(evals, AttackSpec())
    added = _injected(evals, out)
    assert len(added) == 2
    assert all(e.value == 1.0 and e.worker == "w" for e in added)


def test_support_votes_for_below_threshold_worker():
    evals = _worker_with([1, 2] * 5)  # average 1.5
    added = _injected(evals, inject_noise(evals, AttackSpec()))
    assert [e.value for e in added] == [3.0, 3.0]


def test_threshold_itself_is_attacked():
    evals = _worker_with([2, 2])
    added = _injected(evals, inject_noise(evals, AttackSpec()))
    assert [e.value for e in added] == [1.0]


def test_single_vote_worker_gets_one():
    evals = _worker_with([3])
    assert len(_injected(evals, inject_noise(evals, AttackSpec()))) == 1


def test_injected_votes_use_fresh_identities_at_horizon():
    evals = _worker_with([3] * 7, label=2) + [ev("r0", "v", 1, 5)]
    out = inject_noise(evals, AttackSpec())
    added = _injected(evals, out)
    originals = {e.evaluator for e in evals}
    assert all(e.evaluator.startswith(ATTACKER_PREFIX) for e in added)
    assert not originals & {e.evaluator for e in added}
    assert len({e.evaluator for e in added}) == len(added)
    assert {e.time_label for e in added} == {5}
    assert {e.timestamp for e in added} == {max(e.timestamp for e in evals)}


def test_originals_kept_verbatim_and_counts():
    evals = generate_synthetic(40, 30, 4, 0.8, seed=5)
    out = inject_noise(evals, AttackSpec())
    assert out[: len(evals)] == evals
    per_worker = Counter(e.worker for e in evals)
    added = Counter(e.worker for e in _injected(evals, out))
    for w, n in per_worker.items():
        assert added[w] == math.ceil(0.2 * n - 1e-9)


def test_zero_noise_injects_nothing():
    evals = _worker_with([3, 1, 2])
    assert inject_noise(evals, AttackSpec(noise_fraction=0)) == evals


def test_empty_log():
    assert inject_noise([], AttackSpec()) == []


@pytest.mark.parametrize("bad", [-0.1, 1.5])
def test_noise_fraction_validated(bad):
    with pytest.raises(ValueError):
        AttackSpec(noise_fraction=bad)


def test_global_budget_spreads_evenly():
    counts = {"a": 10, "b": 10, "c": 1}
    spec = AttackSpec(global_budget=True)
    got = injection_counts(counts, spec)
    assert sum(got.values()) == math.ceil(0.2 * 21)
    assert got == {"a": 2, "b": 2, "c": 1}
    assert injection_counts(counts, AttackSpec()) == {"a": 2, "b": 2, "c": 1}
    assert injection_counts({"a": 3, "b": 3}, spec) == {"a": 1, "b": 1}


def test_relative_change():
    assert relative_change(2.0, 1.8, 3.0) == pytest.approx(0.1)
    assert relative_change(0.0, 1.5, 3.0) == 0.5
    assert relative_change(2.0, 2.0, 3.0) == 0.0


def test_ten_percent_lands_in_second_bucket():
    rep = measure_changes({"w": 2.0}, {"w": 1.8}, ["w"], 3.0)
    assert rep.counts[1] == 1 and sum(rep.counts) == 1


def test_no_change_bucket_zero():
    rep = measure_changes({"a": 2.0, "b": 1.0}, {"a": 2.0, "b": 1.0}, ["a", "b"], 3.0)
    assert rep.counts[0] == 2
    assert rep.mean == 0.0 and rep.sd == 0.0
    assert rep.fraction_below(10) == 1.0


def test_overflow_bucket():
    rep = measure_changes({"w": 1.0}, {"w": 3.0}, ["w"], 3.0)
    assert rep.counts[-1] == 1
    assert len(rep.counts) == len(BUCKET_EDGES) - 1 == 11
    assert rep.to_json()["buckets"][-1]["hi"] is None


def test_empty_cohort_raises():
    with pytest.raises(ValueError):
        measure_changes({}, {}, [], 3.0)


def test_report_statistics():
    before = {"a": 2.0, "b": 1.0, "c": 2.5}
    after = {"a": 1.5, "b": 1.0, "c": 2.5}
    rep = measure_changes(before, after, before, 3.0, "ours")
    assert rep.mean == pytest.approx(0.25 / 3)
    assert rep.sd == pytest.approx(math.sqrt(2 * (0.25 / 3) ** 2 / 3 + (0.25 - 0.25 / 3) ** 2 / 3))
    assert rep.fractions == pytest.approx([2 / 3, 0, 1 / 3] + [0] * 8)


def test_zero_noise_experiment_all_unchanged():
    evals = generate_synthetic(30, 20, 4, 0.8, seed=2)
    res = run_experiment(evals, AttackSpec(noise_fraction=0), EngineConfig())
    assert res.n_injected == 0 and res.changed_cohort == []
    for by in res.reports.values():
        assert by["full"].mean == 0.0 and by["full"].counts[0] == 30
        assert by["changed"] is None


def test_experiment_model_selection_and_cohorts():
    evals = generate_synthetic(30, 20, 4, 0.8, seed=2)
    res = run_experiment(evals, AttackSpec(), EngineConfig(), models=["ours", "ebay"])
    assert set(res.reports) == {"ours", "normal_avg"}
    assert res.n_injected == sum(math.ceil(0.2 * n - 1e-9) for n in Counter(e.worker for e in evals).values())
    changed = res.reports["ours"]["changed"]
    assert changed.size == len(res.changed_cohort) > 0
    assert res.reports["normal_avg"]["changed"].size == changed.size
    assert res.summary()["models"]["ours"]["full"]["size"] == 30


def test_synthetic_deterministic():
    a = generate_synthetic(50, 20, 4, 0.8, seed=9)
    b = generate_synthetic(50, 20, 4, 0.8, seed=9)
    c = generate_synthetic(50, 20, 4, 0.8, seed=10)
    assert a == b and a != c


def test_synthetic_shape():
    evals, truth = generate_synthetic(500, 200, 8, 0.8, seed=1, return_truth=True)
    assert len(evals) == 5000
    assert len(truth.dishonest) == 40
    assert {e.time_label for e in evals} <= set(range(1, 9))
    assert all(e.value in (1.0, 2.0, 3.0) for e in evals)
    pairs = Counter((e.evaluator, e.worker) for e in evals)
    assert max(pairs.values()) == 1


def test_synthetic_noise_free_honest_average_is_rounded_latent():
    evals, truth = generate_synthetic(40, 15, 3, 1.0, seed=4, noise_width=0.0, return_truth=True)
    assert truth.dishonest == []
    avg = normal_averages(build_graph(evals))
    for w, q in truth.latent.items():
        assert avg[w] == round(q)


def test_synthetic_dishonest_votes():
    evals, truth = generate_synthetic(40, 15, 3, 0.0, seed=4, return_truth=True)
    for e in evals:
        assert e.value == (1.0 if truth.latent[e.worker] >= 2 else 3.0)


@pytest.mark.parametrize("kw", [dict(n_workers=0), dict(honest_fraction=1.2), dict(noise_width=-1)])
def test_synthetic_validation(kw):
    args = dict(n_workers=5, n_evaluators=5, n_intervals=2, honest_fraction=0.8, seed=0)
    args.update(kw)
    with pytest.raises(ValueError):
        generate_synthetic(**args)
