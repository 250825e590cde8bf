# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled segment kernels (OpenMP over segments).

Each segment is reduced sequentially by exactly one thread, in storage
order, so results do not depend on ``nthreads``.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport pow, sqrt, fabs

cnp.import_array()

NAME = "cython"

ctypedef cnp.int64_t i64


cdef inline void _edge(const i64[::1] ptr, const i64[::1] labels, const double[::1] values,
                       const double[::1] hc, double q, i64 horizon, Py_ssize_t e,
                       double[::1] tau, double[::1] omega, double[::1] pmean,
                       double[::1] vsum, double[::1] cnt) noexcept nogil:
    cdef i64 lo = ptr[e], hi = ptr[e + 1], k, newest = labels[lo]
    cdef double num = 0.0, den = 0.0, om = 0.0, s = 0.0, w, v
    cdef double vmin = values[lo], vmax = values[lo]
    for k in range(lo, hi):
        if labels[k] > newest:
            newest = labels[k]
    for k in range(lo, hi):
        v = values[k]
        w = pow(q, <double>(labels[k] - newest))
        num += v * w
        den += w
        om += pow(q, <double>(labels[k] - horizon)) * hc[k]
        s += v
        if v < vmin:
            vmin = v
        if v > vmax:
            vmax = v
    w = num / den
    if w < vmin:
        w = vmin
    elif w > vmax:
        w = vmax
    tau[e] = w
    omega[e] = om
    vsum[e] = s
    cnt[e] = <double>(hi - lo)
    pmean[e] = s / <double>(hi - lo)


def edge_stats(i64[::1] edge_ptr, i64[::1] labels, double[::1] values, double[::1] hcredits,
               double q, i64 horizon, int nthreads=1):
    cdef Py_ssize_t n = edge_ptr.shape[0] - 1, e
    tau = np.empty(n)
    omega = np.empty(n)
    pmean = np.empty(n)
    vsum = np.empty(n)
    cnt = np.empty(n)
    cdef double[::1] t = tau, o = omega, p = pmean, s = vsum, c = cnt
    for e in prange(n, nogil=True, schedule="static", num_threads=nthreads):
        _edge(edge_ptr, labels, values, hcredits, q, horizon, e, t, o, p, s, c)
    return tau, omega, pmean, vsum, cnt


cdef inline void _consensus(const i64[::1] ptr, const i64[::1] order, const double[::1] pm,
                            const double[::1] esum, const double[::1] ecnt, bint flat, Py_ssize_t j,
                            double[::1] mean, double[::1] sd) noexcept nogil:
    cdef i64 lo = ptr[j], hi = ptr[j + 1], k
    cdef double s = 0.0, c = 0.0, m, d, acc = 0.0
    if flat:
        for k in range(lo, hi):
            s += esum[order[k]]
            c += ecnt[order[k]]
        m = s / c
    else:
        for k in range(lo, hi):
            s += pm[order[k]]
        m = s / <double>(hi - lo)
    for k in range(lo, hi):
        d = pm[order[k]] - m
        acc += d * d
    mean[j] = m
    sd[j] = sqrt(acc / <double>(hi - lo))


def worker_consensus(i64[::1] worker_ptr, i64[::1] worker_edges, double[::1] pair_mean,
                     double[::1] edge_sum, double[::1] edge_count, bint flat, int nthreads=1):
    cdef Py_ssize_t n = worker_ptr.shape[0] - 1, j
    mean = np.empty(n)
    sd = np.empty(n)
    cdef double[::1] m = mean, s = sd
    for j in prange(n, nogil=True, schedule="static", num_threads=nthreads):
        _consensus(worker_ptr, worker_edges, pair_mean, edge_sum, edge_count, flat, j, m, s)
    return mean, sd


cdef inline double _phi(double pm, double lo, double hi, double scale_max, bint complement,
                        double slack) noexcept nogil:
    cdef double dist
    if pm >= lo - slack and pm <= hi + slack:
        return 1.0
    if pm < lo:
        dist = (lo - pm) / scale_max
    else:
        dist = (pm - hi) / scale_max
    if dist > 1.0:
        dist = 1.0
    if complement:
        return 1.0 - dist
    return dist


def fairness(double[::1] pair_mean, i64[::1] edge_worker, double[::1] mean, double[::1] sd,
             double scale_max, bint complement, double band_tol, int nthreads=1):
    cdef Py_ssize_t n = pair_mean.shape[0], e
    cdef i64 j
    cdef double slack = band_tol * scale_max
    phi = np.empty(n)
    cdef double[::1] out = phi
    for e in prange(n, nogil=True, schedule="static", num_threads=nthreads):
        j = edge_worker[e]
        out[e] = _phi(pair_mean[e], mean[j] - sd[j], mean[j] + sd[j], scale_max, complement, slack)
    return phi


cdef inline void _worker(const i64[::1] ptr, const i64[::1] order, const double[::1] tau,
                         const double[::1] omega, const double[::1] phi, Py_ssize_t j,
                         double[::1] rho, double[::1] weight, cnp.uint8_t[::1] degen) noexcept nogil:
    cdef i64 lo = ptr[j], hi = ptr[j + 1], k, e
    cdef double num = 0.0, den = 0.0, wt, r
    cdef double tmin = tau[order[lo]], tmax = tau[order[lo]]
    for k in range(lo, hi):
        e = order[k]
        wt = omega[e] * phi[e]
        num += wt * tau[e]
        den += wt
        if tau[e] < tmin:
            tmin = tau[e]
        if tau[e] > tmax:
            tmax = tau[e]
    weight[j] = den
    if den == 0.0:
        rho[j] = 0.0
        degen[j] = 1
        return
    r = num / den
    if r < tmin:
        r = tmin
    elif r > tmax:
        r = tmax
    rho[j] = r
    degen[j] = 0


def worker_aggregate(i64[::1] worker_ptr, i64[::1] worker_edges, double[::1] tau,
                     double[::1] omega, double[::1] phi, int nthreads=1):
    cdef Py_ssize_t n = worker_ptr.shape[0] - 1, j
    rho = np.empty(n)
    weight = np.empty(n)
    degen = np.empty(n, dtype=np.uint8)
    cdef double[::1] r = rho, w = weight
    cdef cnp.uint8_t[::1] d = degen
    for j in prange(n, nogil=True, schedule="static", num_threads=nthreads):
        _worker(worker_ptr, worker_edges, tau, omega, phi, j, r, w, d)
    return rho, weight, degen


cdef inline void _evaluator(const i64[::1] ptr, const double[::1] omega, const double[::1] phi,
                            Py_ssize_t i, double[::1] gamma, double[::1] psi) noexcept nogil:
    cdef i64 lo = ptr[i], hi = ptr[i + 1], k
    cdef double num = 0.0, den = 0.0, g
    cdef double pmin = phi[lo], pmax = phi[lo]
    for k in range(lo, hi):
        num += omega[k] * phi[k]
        den += omega[k]
        if phi[k] < pmin:
            pmin = phi[k]
        if phi[k] > pmax:
            pmax = phi[k]
    g = num / den
    if g < pmin:
        g = pmin
    elif g > pmax:
        g = pmax
    gamma[i] = g
    psi[i] = den


def evaluator_aggregate(i64[::1] eval_ptr, double[::1] omega, double[::1] phi, int nthreads=1):
    cdef Py_ssize_t n = eval_ptr.shape[0] - 1, i
    gamma = np.empty(n)
    psi = np.empty(n)
    cdef double[::1] g = gamma, p = psi
    for i in prange(n, nogil=True, schedule="static", num_threads=nthreads):
        _evaluator(eval_ptr, omega, phi, i, g, p)
    return gamma, psi


cdef inline double _adaptive(const i64[::1] ptr, const i64[::1] voter, const double[::1] vals,
                             const double[::1] rep, double old, double damping, Py_ssize_t j) noexcept nogil:
    cdef i64 lo = ptr[j], hi = ptr[j + 1], k
    cdef double num = 0.0, den = 0.0, r, v
    cdef double vmin = vals[lo], vmax = vals[lo]
    for k in range(lo, hi):
        r = rep[voter[k]]
        v = vals[k]
        num += r * v
        den += r
        if v < vmin:
            vmin = v
        if v > vmax:
            vmax = v
    if not den > 0.0:
        return old
    r = num / den
    if r < vmin:
        r = vmin
    elif r > vmax:
        r = vmax
    return old + damping * (r - old)


def adaptive_round(i64[::1] vote_ptr, i64[::1] vote_voter, double[::1] vote_values,
                   double[::1] rep, i64[::1] target, double[::1] out, double damping=1.0,
                   int nthreads=1):
    cdef Py_ssize_t n = vote_ptr.shape[0] - 1, j
    if n == 0:
        return 0.0
    delta = np.empty(n)
    cdef double[::1] dl = delta
    cdef double new
    for j in prange(n, nogil=True, schedule="static", num_threads=nthreads):
        new = _adaptive(vote_ptr, vote_voter, vote_values, rep, rep[target[j]], damping, j)
        dl[j] = fabs(new - rep[target[j]])
        out[target[j]] = new
    return float(delta.max())
