"""Pure-Python (numpy) implementation of the segment kernels.

Same signatures as the compiled ``_ckernels`` module. ``nthreads`` is accepted
and ignored: every reduction here is a single vectorised pass.
"""

import numpy as np

NAME = "python"


def _starts(ptr):
    return np.asarray(ptr[:-1])


def _seg_ids(ptr):
    return np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))


def edge_stats(edge_ptr, labels, values, hcredits, q, horizon, nthreads=1):
    """Per edge: trust rank, weight of trust, plain mean, value sum, count."""
    n_edges = len(edge_ptr) - 1
    if n_edges == 0:
        z = np.zeros(0)
        return z, z.copy(), z.copy(), z.copy(), z.copy()
    starts = _starts(edge_ptr)
    ids = _seg_ids(edge_ptr)
    counts = np.diff(edge_ptr).astype(np.float64)
    newest = np.maximum.reduceat(labels, starts)
    w = np.power(q, (labels - newest[ids]).astype(np.float64))
    tau = np.add.reduceat(values * w, starts) / np.add.reduceat(w, starts)
    tau = np.clip(tau, np.minimum.reduceat(values, starts), np.maximum.reduceat(values, starts))
    lag = np.power(q, (labels - horizon).astype(np.float64))
    omega = np.add.reduceat(lag * hcredits, starts)
    vsum = np.add.reduceat(values, starts)
    return tau, omega, vsum / counts, vsum, counts


def worker_consensus(worker_ptr, worker_edges, pair_mean, edge_sum, edge_count, flat, nthreads=1):
    """Per worker: band centre and population SD of per-evaluator means."""
    if len(worker_ptr) == 1:
        z = np.zeros(0)
        return z, z.copy()
    starts = _starts(worker_ptr)
    ids = _seg_ids(worker_ptr)
    pm = pair_mean[worker_edges]
    n = np.diff(worker_ptr).astype(np.float64)
    if flat:
        mean = np.add.reduceat(edge_sum[worker_edges], starts) / np.add.reduceat(edge_count[worker_edges], starts)
    else:
        mean = np.add.reduceat(pm, starts) / n
    sd = np.sqrt(np.add.reduceat((pm - mean[ids]) ** 2, starts) / n)
    return mean, sd


def fairness(pair_mean, edge_worker, mean, sd, scale_max, complement, band_tol, nthreads=1):
    slack = band_tol * scale_max
    lo = (mean - sd)[edge_worker]
    hi = (mean + sd)[edge_worker]
    dist = np.where(pair_mean < lo, lo - pair_mean, np.where(pair_mean > hi, pair_mean - hi, 0.0)) / scale_max
    dist = np.minimum(dist, 1.0)
    inside = (pair_mean >= lo - slack) & (pair_mean <= hi + slack)
    out = 1.0 - dist if complement else dist
    return np.where(inside, 1.0, out)


def worker_aggregate(worker_ptr, worker_edges, tau, omega, phi, nthreads=1):
    """Per worker: reputation, weight of reputation, degenerate flag."""
    if len(worker_ptr) == 1:
        z = np.zeros(0)
        return z, z.copy(), np.zeros(0, dtype=np.uint8)
    starts = _starts(worker_ptr)
    t = tau[worker_edges]
    wt = omega[worker_edges] * phi[worker_edges]
    weight = np.add.reduceat(wt, starts)
    num = np.add.reduceat(wt * t, starts)
    degenerate = weight == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, weight))
    clipped = np.clip(rho, np.minimum.reduceat(t, starts), np.maximum.reduceat(t, starts))
    rho = np.where(degenerate, 0.0, clipped)
    return rho, weight, degenerate.astype(np.uint8)


def evaluator_aggregate(eval_ptr, omega, phi, nthreads=1):
    """Per evaluator: fairness rank and weight of fairness."""
    if len(eval_ptr) == 1:
        z = np.zeros(0)
        return z, z.copy()
    starts = _starts(eval_ptr)
    psi = np.add.reduceat(omega, starts)
    gamma = np.add.reduceat(omega * phi, starts) / psi
    gamma = np.clip(gamma, np.minimum.reduceat(phi, starts), np.maximum.reduceat(phi, starts))
    return gamma, psi


def adaptive_round(vote_ptr, vote_voter, vote_values, rep, target, out, damping=1.0, nthreads=1):
    """One synchronous update: ``out[target[j]]`` = reputation-weighted mean of worker j's votes.

    ``damping`` blends the update with the previous score. Workers whose
    voters all carry zero reputation keep their previous score.
    Returns the largest absolute change.
    """
    if len(vote_ptr) == 1:
        return 0.0
    starts = _starts(vote_ptr)
    r = rep[vote_voter]
    den = np.add.reduceat(r, starts)
    num = np.add.reduceat(r * vote_values, starts)
    old = rep[target]
    with np.errstate(invalid="ignore", divide="ignore"):
        new = np.where(den > 0, num / np.where(den > 0, den, 1.0), old)
    new = np.clip(new, np.minimum.reduceat(vote_values, starts), np.maximum.reduceat(vote_values, starts))
    new = np.where(den > 0, old + damping * (new - old), old)
    out[target] = new
    return float(np.max(np.abs(new - old)))
