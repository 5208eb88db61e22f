"""Compiled inner loops for heat-bath Glauber dynamics and explicit-matrix chains.

All kernels draw from a ``numpy.random.Generator`` passed in by the caller, so
a chain's trajectory is fully determined by its generator state.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _table_conditional(params, x, site, radix, h, out):
    energies, strides = params
    idx = 0
    for j in range(x.shape[0]):
        idx += x[j] * strides[j]
    base = idx - x[site] * strides[site]
    for y in range(radix):
        out[y] = energies[base + y * strides[site]]


@numba.njit(cache=True)
def _ising_conditional(params, x, site, radix, h, out):
    ptr, nbrs = params
    agree0 = 0
    agree1 = 0
    for p in range(ptr[site], ptr[site + 1]):
        if x[nbrs[p]] == 0:
            agree0 += 1
        else:
            agree1 += 1
    cur = agree1 if x[site] == 1 else agree0
    base = h + cur
    out[0] = base - agree0
    out[1] = base - agree1


@numba.njit(cache=True)
def _voting_energy(omega, wt, wf, x):
    n = wt.shape[0]
    q = 2.0 * x[0] - 1.0
    mt = 0.0
    mf = 0.0
    s = 0.0
    for i in range(n):
        if x[1 + i] > 0:
            mt = 1.0
            s += wt[i]
        if x[1 + n + i] > 0:
            mf = 1.0
            s += wf[i]
    return omega * q * mt - omega * q * mf + s


@numba.njit(cache=True)
def _voting_conditional(params, x, site, radix, h, out):
    omega, wt, wf = params
    old = x[site]
    for y in range(radix):
        x[site] = y
        out[y] = _voting_energy(omega[0], wt, wf, x)
    x[site] = old


@numba.njit
def _run_chain(conditional, params, radices, strides, x, h, betas, coefs, hmin, cumw,
              rng, n_steps, trace_len, avgs, visited, endpoint):
    """Advance a product of Glauber chains ``n_steps`` steps in place.

    ``conditional`` fills the candidate energies for one site; it is a
    compiled function passed by value, so each model family gets its own
    specialisation.
    """
    ell = x.shape[0]
    n = x.shape[1]
    maxr = 1
    for j in range(n):
        if radices[j] > maxr:
            maxr = radices[j]
    out = np.empty(maxr)
    w = np.empty(maxr)
    acc = 0.0
    t_in = 0
    k = 0
    record = visited.shape[0] > 0
    for s in range(n_steps):
        c = 0
        if ell > 1:
            u = rng.random()
            while c < ell - 1 and u >= cumw[c]:
                c += 1
        site = rng.integers(0, n)
        r = radices[site]
        xc = x[c]
        conditional(params, xc, site, r, h[c], out)
        emin = out[0]
        for y in range(1, r):
            if out[y] < emin:
                emin = out[y]
        total = 0.0
        for y in range(r):
            w[y] = math.exp(-betas[c] * (out[y] - emin))
            total += w[y]
        u = rng.random() * total
        y = 0
        cum = w[0]
        while y < r - 1 and u >= cum:
            y += 1
            cum += w[y]
        xc[site] = y
        h[c] = out[y]
        if trace_len > 0:
            t_in += 1
            if endpoint:
                # thinned sampling: keep sum_j coefs_j H~_j at block ends only
                if t_in == trace_len:
                    e = 0.0
                    for j in range(ell):
                        e += coefs[j] * (h[j] - hmin)
                    avgs[k] = e
                    k += 1
                    t_in = 0
            else:
                e = 0.0
                for j in range(ell):
                    e += coefs[j] * (h[j] - hmin)
                acc += math.exp(e)
                if t_in == trace_len:
                    avgs[k] = acc / trace_len
                    k += 1
                    acc = 0.0
                    t_in = 0
        if record:
            for j in range(ell):
                idx = 0
                for i in range(n):
                    idx += x[j, i] * strides[i]
                visited[s, j] = idx


# one entry point per model family.  Kernels that take a Generator cannot be
# cached on disk, so these compile once per process.

@numba.njit
def run_table(params, radices, strides, x, h, betas, coefs, hmin, cumw, rng, n_steps,
              trace_len, avgs, visited, endpoint):
    _run_chain(_table_conditional, params, radices, strides, x, h, betas, coefs, hmin,
               cumw, rng, n_steps, trace_len, avgs, visited, endpoint)


@numba.njit
def run_ising(params, radices, strides, x, h, betas, coefs, hmin, cumw, rng, n_steps,
              trace_len, avgs, visited, endpoint):
    _run_chain(_ising_conditional, params, radices, strides, x, h, betas, coefs, hmin,
               cumw, rng, n_steps, trace_len, avgs, visited, endpoint)


@numba.njit
def run_voting(params, radices, strides, x, h, betas, coefs, hmin, cumw, rng, n_steps,
               trace_len, avgs, visited, endpoint):
    _run_chain(_voting_conditional, params, radices, strides, x, h, betas, coefs, hmin,
               cumw, rng, n_steps, trace_len, avgs, visited, endpoint)


RUNNERS = {"table": run_table, "ising": run_ising, "voting": run_voting}


@numba.njit
def run_matrix_chain(cum_rows, state, values, rng, n_steps, trace_len, avgs,
                     visited):
    """Advance an explicit-matrix chain; returns the final state."""
    m = cum_rows.shape[0]
    acc = 0.0
    t_in = 0
    k = 0
    record = visited.shape[0] > 0
    for s in range(n_steps):
        u = rng.random()
        row = cum_rows[state]
        y = 0
        while y < m - 1 and u >= row[y]:
            y += 1
        state = y
        if trace_len > 0:
            acc += values[state]
            t_in += 1
            if t_in == trace_len:
                avgs[k] = acc / trace_len
                k += 1
                acc = 0.0
                t_in = 0
        if record:
            visited[s] = state
    return state
