"""Brute-force ground truth for small models.

Everything here enumerates the state space explicitly.  It is meant as an
independent reference for the sampling code, so it shares nothing with the
kernels beyond the model's vectorised energy function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chains import ChainBounds
from .errors import OracleUnavailableError
from .models import ENUMERATION_CAP, Model

SPECTRAL_CAP = 4096
TRACE_VARIANCE_CAP = 512


@dataclass(frozen=True)
class ExactSummary:
    beta: float
    Z: float
    z: float
    histogram: dict
    mean_H: float
    var_H: float
    n_states: int


def _energies(model, cap):
    if model.n_states > cap:
        raise OracleUnavailableError(
            f"|Omega| = {model.n_states} exceeds oracle cap {cap}")
    return model.energies(cap=cap)


def _log_weights(e: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    logw = -beta * e
    return logw, float(logw.max())


def exact_partition(model: Model, beta: float,
                    cap: int = ENUMERATION_CAP) -> ExactSummary:
    """Exact ``Z(beta) = sum_x exp(-beta H(x))`` by enumeration."""
    e = _energies(model, cap)
    levels, counts = np.unique(e, return_counts=True)
    logw = -beta * levels
    top = float(logw.max())
    terms = counts * np.exp(logw - top)
    s = math.fsum(terms.tolist())
    z = top + math.log(s)
    p = terms / s
    mean = math.fsum((p * levels).tolist())
    var = math.fsum((p * (levels - mean) ** 2).tolist())
    hist = {float(v) + 0.0: int(c) for v, c in zip(levels, counts)}
    return ExactSummary(beta, math.exp(top) * s, z, hist, mean, var, model.n_states)


def log_partition(model: Model, beta: float, cap: int = ENUMERATION_CAP) -> float:
    return exact_partition(model, beta, cap).z


def gibbs_distribution(model: Model, beta: float,
                       cap: int = ENUMERATION_CAP) -> np.ndarray:
    e = _energies(model, cap)
    logw, top = _log_weights(e, beta)
    w = np.exp(logw - top)
    return w / math.fsum(w.tolist())


def exact_sample(model: Model, beta: float, rng: np.random.Generator,
                 size: int | None = None, cap: int = ENUMERATION_CAP):
    """State index (or array of indices) drawn exactly from ``pi_beta``."""
    pi = gibbs_distribution(model, beta, cap)
    cdf = np.cumsum(pi)
    cdf[-1] = 1.0
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right")
    return int(out) if size is None else out


class ExactSampler:
    """Exact ``pi_beta`` sampler over an enumerated model, cached per beta."""

    def __init__(self, model: Model, cap: int = ENUMERATION_CAP):
        self.model = model
        self.energies = _energies(model, cap)
        self._cdf = {}

    def _cdf_at(self, beta):
        cdf = self._cdf.get(beta)
        if cdf is None:
            logw = -beta * self.energies
            w = np.exp(logw - logw.max())
            cdf = np.cumsum(w)
            cdf /= cdf[-1]
            if len(self._cdf) > 64:
                self._cdf.clear()
            self._cdf[beta] = cdf
        return cdf

    def sample(self, beta: float, rng: np.random.Generator, size=None):
        out = np.searchsorted(self._cdf_at(beta), rng.random(size), side="right")
        return int(out) if size is None else out


def transition_matrix(model: Model, beta: float,
                      cap: int = SPECTRAL_CAP) -> np.ndarray:
    """Dense heat-bath Glauber transition matrix in mixed-radix state order."""
    e = _energies(model, cap)
    n_states = len(e)
    idx = np.arange(n_states, dtype=np.int64)
    P = np.zeros((n_states, n_states))
    space = model.space
    n = space.n_sites
    for site, (r, s) in enumerate(zip(space.radices, space.strides)):
        xi = (idx // s) % r
        base = idx - xi * s
        cand = base[:, None] + np.arange(r)[None, :] * s
        logw = -beta * e[cand]
        w = np.exp(logw - logw.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        for y in range(r):
            P[idx, cand[:, y]] += w[:, y] / n
    return P


def product_transition_matrix(mats, weights=None) -> np.ndarray:
    """Transition matrix of the weighted product chain (component 0 least significant)."""
    ell = len(mats)
    w = np.full(ell, 1.0 / ell) if weights is None else np.asarray(weights, float)
    dims = [m.shape[0] for m in mats]
    out = np.zeros((math.prod(dims),) * 2)
    for i, (Pi, wi) in enumerate(zip(mats, w)):
        term = np.ones((1, 1))
        # kron builds most-significant first, so iterate components in reverse
        for j in reversed(range(ell)):
            term = np.kron(term, Pi if j == i else np.eye(dims[j]))
        out += wi * term
    return out


def stationary(P: np.ndarray) -> np.ndarray:
    """Stationary distribution of an irreducible chain via a dense solve."""
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def _symmetrised(P, pi):
    d = np.sqrt(pi)
    S = d[:, None] * P / d[None, :]
    return 0.5 * (S + S.T)


def matrix_second_eigenvalue(P: np.ndarray, pi: np.ndarray | None = None) -> float:
    """Second-largest absolute eigenvalue of a reversible chain."""
    if pi is None:
        pi = stationary(P)
    ev = np.linalg.eigvalsh(_symmetrised(P, pi))
    # drop the Perron eigenvalue (the largest), keep the largest modulus of the rest
    rest = np.delete(ev, np.argmax(ev))
    return float(np.max(np.abs(rest))) if len(rest) else 0.0


def power_second_eigenvalue(P: np.ndarray, pi: np.ndarray, rng=None,
                            max_iter: int = 200_000, tol: float = 1e-14) -> float:
    """Same quantity by power iteration orthogonal to the stationary direction."""
    rng = np.random.default_rng(0) if rng is None else rng
    S = _symmetrised(P, pi)
    top = np.sqrt(pi)
    top /= np.linalg.norm(top)
    v = rng.standard_normal(len(pi))
    v -= top * (top @ v)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = S @ (S @ v)
        w -= top * (top @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        new = math.sqrt(nrm)
        v = w / nrm
        if abs(new - est) < tol:
            return new
        est = new
    return est


@dataclass(frozen=True)
class SpectralData:
    lam: float
    tau_rx: float
    pi_min: float


def spectral(model: Model, beta: float, cap: int = SPECTRAL_CAP) -> SpectralData:
    """Exact ``lambda``, ``tau_rx = 1/(1 - lambda)`` and ``pi_min`` of Glauber dynamics."""
    P = transition_matrix(model, beta, cap)
    pi = gibbs_distribution(model, beta)
    lam = matrix_second_eigenvalue(P, pi)
    return SpectralData(lam, 1.0 / (1.0 - lam), float(pi.min()))


def matrix_spectral(P: np.ndarray) -> SpectralData:
    pi = stationary(P)
    lam = matrix_second_eigenvalue(P, pi)
    return SpectralData(lam, 1.0 / (1.0 - lam), float(pi.min()))


def oracle_bounds(model: Model, beta: float, cap: int = SPECTRAL_CAP) -> ChainBounds:
    sd = spectral(model, beta, cap)
    return ChainBounds(sd.lam, max(1, math.ceil(sd.tau_rx)), sd.pi_min, "oracle")


def relative_variance(pi: np.ndarray, f: np.ndarray) -> float:
    m1 = float(pi @ f)
    m2 = float(pi @ (f * f))
    return m2 / (m1 * m1) - 1.0


def trace_moments(P: np.ndarray, pi: np.ndarray, f: np.ndarray,
                  tau: int) -> tuple[float, float]:
    """``E[fbar]`` and ``E[fbar^2]`` for a length-``tau`` trace started at stationarity.

    Uses ``E[f(X_s) f(X_t)] = sum_x pi(x) f(x) (P^{|t-s|} f)(x)``.
    """
    f = np.asarray(f, dtype=np.float64)
    mean = float(pi @ f)
    pf = pi * f
    g = f.copy()
    total = tau * float(pf @ g)
    for lag in range(1, tau):
        g = P @ g
        total += 2.0 * (tau - lag) * float(pf @ g)
    return mean, total / (tau * tau)


def trace_variance_matrix(P: np.ndarray, pi: np.ndarray, f: np.ndarray,
                          tau: int) -> float:
    """Variance of the stationary ``tau``-trace average of ``f``."""
    mean, second = trace_moments(P, pi, f, tau)
    return second - mean * mean


def relative_trace_variance_matrix(P, pi, f, tau) -> float:
    mean, second = trace_moments(P, pi, f, tau)
    return second / (mean * mean) - 1.0


def exact_trace_variance(model: Model, beta: float, f, tau: int,
                         cap: int = TRACE_VARIANCE_CAP) -> float:
    """Relative trace variance of ``f`` for Glauber dynamics at ``beta``.

    ``f`` is either a vector of per-state values or a callable mapping the
    vector of raw energies to per-state values.
    """
    if model.n_states > cap:
        raise OracleUnavailableError(
            f"|Omega| = {model.n_states} exceeds trace-variance cap {cap}")
    P = transition_matrix(model, beta, cap)
    pi = gibbs_distribution(model, beta)
    vals = f(model.energies()) if callable(f) else np.asarray(f, dtype=np.float64)
    return relative_trace_variance_matrix(P, pi, vals, tau)
