"""Paired product estimators and their variance diagnostics.

For an interval ``(b_i, b_{i+1})`` with width ``D_i`` the pair is

    f_i(x) = exp(-D_i/2 * H~(x)),   evaluated under pi_{b_i}
    g_i(y) = exp(+D_i/2 * H~(y)),   evaluated under pi_{b_{i+1}}

so that ``E f_i = Z(mid)/Z(b_i)`` and ``E g_i = Z(mid)/Z(b_{i+1})``.  The
tensor products ``F``, ``G`` over a schedule have means ``mu``, ``nu`` with
``nu / mu = Z(b_0)/Z(b_ell) = Q``.  All energies here are shifted, ``H~ >= 0``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OracleUnavailableError, ParameterError
from .models import ENUMERATION_CAP, Model, OffsetHamiltonian, shifted_hamiltonian
from .tpa import Schedule


@dataclass(frozen=True)
class EstimatorPair:
    beta_lo: float
    beta_hi: float
    h_min: float = 0.0
    h_max: float = 0.0

    @property
    def delta(self) -> float:
        return self.beta_hi - self.beta_lo

    @property
    def half(self) -> float:
        return 0.5 * self.delta

    @property
    def range_f(self) -> tuple[float, float]:
        return math.exp(-self.half * self.h_max), math.exp(-self.half * self.h_min)

    @property
    def range_g(self) -> tuple[float, float]:
        return math.exp(self.half * self.h_min), math.exp(self.half * self.h_max)

    def f(self, h):
        return np.exp(-self.half * np.asarray(h, dtype=np.float64))

    def g(self, h):
        return np.exp(self.half * np.asarray(h, dtype=np.float64))


def eval_pair(pair: EstimatorPair, h):
    """``(f(x), g(x))`` for shifted energy ``h = H~(x)`` (scalar or array)."""
    f, g = pair.f(h), pair.g(h)
    if np.ndim(f) == 0:
        return float(f), float(g)
    return f, g


@dataclass(frozen=True)
class TensorEstimator:
    schedule: Schedule
    h_min: float = 0.0
    h_max: float = 0.0

    @property
    def ell(self) -> int:
        return self.schedule.ell

    @property
    def pairs(self) -> list[EstimatorPair]:
        b = self.schedule.betas
        return [EstimatorPair(b[i], b[i + 1], self.h_min, self.h_max)
                for i in range(self.ell)]

    @property
    def coefs_f(self) -> np.ndarray:
        """Per-component exponent coefficients of ``F`` (components at ``b_0..b_{ell-1}``)."""
        return -0.5 * self.schedule.deltas

    @property
    def coefs_g(self) -> np.ndarray:
        """Per-component exponent coefficients of ``G`` (components at ``b_1..b_ell``)."""
        return 0.5 * self.schedule.deltas

    @property
    def betas_f(self) -> tuple[float, ...]:
        return self.schedule.betas[:-1]

    @property
    def betas_g(self) -> tuple[float, ...]:
        return self.schedule.betas[1:]

    @property
    def range_F(self) -> tuple[float, float]:
        half = 0.5 * self.schedule.delta_total
        return math.exp(-half * self.h_max), math.exp(-half * self.h_min)

    @property
    def range_G(self) -> tuple[float, float]:
        half = 0.5 * self.schedule.delta_total
        return math.exp(half * self.h_min), math.exp(half * self.h_max)


def tensor_for(schedule: Schedule, model: Model | OffsetHamiltonian) -> TensorEstimator:
    sh = model if isinstance(model, OffsetHamiltonian) else shifted_hamiltonian(model)
    return TensorEstimator(schedule, sh.h_min, sh.h_max)


def eval_tensor(tensor: TensorEstimator, joint_h) -> tuple[float, float]:
    """``(F, G)`` at a joint state given by its ``ell`` shifted energies."""
    h = np.asarray(joint_h, dtype=np.float64)
    if h.shape != (tensor.ell,):
        raise ParameterError(f"joint state has {h.size} components, expected {tensor.ell}")
    return (math.exp(float(tensor.coefs_f @ h)), math.exp(float(tensor.coefs_g @ h)))


# -- exact moments ------------------------------------------------------------

class LevelOracle:
    """Shifted log-partition function from the energy-level histogram."""

    def __init__(self, model: Model | OffsetHamiltonian, cap: int = ENUMERATION_CAP):
        sh = model if isinstance(model, OffsetHamiltonian) else shifted_hamiltonian(model)
        if sh.base.n_states > cap:
            raise OracleUnavailableError(f"|Omega| = {sh.base.n_states} exceeds cap {cap}")
        self.shifted = sh
        levels, counts = np.unique(sh.energies(cap), return_counts=True)
        self.levels = levels
        self.log_counts = np.log(counts.astype(np.float64))

    def z(self, beta: float) -> float:
        """``ln Z~(beta)`` for the shifted Hamiltonian."""
        t = self.log_counts - beta * self.levels
        top = float(t.max())
        return top + math.log(math.fsum(np.exp(t - top).tolist()))

    def mean_h(self, beta: float) -> float:
        t = self.log_counts - beta * self.levels
        w = np.exp(t - t.max())
        return math.fsum((w * self.levels).tolist()) / math.fsum(w.tolist())

    def log_q(self, beta_lo: float, beta_hi: float) -> float:
        return self.z(beta_lo) - self.z(beta_hi)

    def pair_moments(self, pair: EstimatorPair) -> dict:
        lo, hi = pair.beta_lo, pair.beta_hi
        mid = 0.5 * (lo + hi)
        zl, zm, zh = self.z(lo), self.z(mid), self.z(hi)
        # E f = Z(mid)/Z(lo), E f^2 = Z(hi)/Z(lo); symmetric for g
        return {"mean_f": math.exp(zm - zl), "mean_g": math.exp(zm - zh),
                "vrel_f": math.expm1(zh + zl - 2.0 * zm),
                "vrel_g": math.expm1(zl + zh - 2.0 * zm)}


# -- diagnostics --------------------------------------------------------------

@dataclass
class VarianceDiagnostics:
    vrel_f: list[float]
    vrel_g: list[float]
    vrel_F: float
    vrel_G: float
    mu: float
    nu: float
    Q: float
    relR: float
    relR_i: list[float]
    alpha1: float
    alpha0: list[float]
    eps0: float | None = None
    reltrv_f: list[float] = field(default_factory=list)
    reltrv_g: list[float] = field(default_factory=list)
    source: str = "oracle"

    def rows(self) -> list[tuple[str, int, float]]:
        out = [("vrel_F", -1, self.vrel_F), ("vrel_G", -1, self.vrel_G),
               ("mu", -1, self.mu), ("nu", -1, self.nu), ("Q", -1, self.Q),
               ("relR", -1, self.relR), ("alpha1", -1, self.alpha1)]
        if self.eps0 is not None:
            out.append(("eps0", -1, self.eps0))
        for name in ("vrel_f", "vrel_g", "relR_i", "alpha0", "reltrv_f", "reltrv_g"):
            out.extend((name, i, v) for i, v in enumerate(getattr(self, name)))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "interval", "value"])
        for name, i, v in self.rows():
            w.writerow([name, "" if i < 0 else i, repr(float(v))])
        return buf.getvalue()


def epsilon_zero_formula(tau_prx: float, T: float, Q: float, delta: float,
                         h_min: float, h_max: float, alpha1: float) -> float:
    """Crossover precision ``(tau_prx/T)(sqrt(e^{D Hmin}/Q) + sqrt(Q/e^{D Hmax})) alpha1``."""
    lq = math.log(Q)
    return (tau_prx / T) * (math.exp(0.5 * (delta * h_min - lq))
                            + math.exp(0.5 * (lq - delta * h_max))) * alpha1


def _alpha0(oracle: LevelOracle, betas) -> list[float]:
    out = []
    for b in betas:
        m = oracle.mean_h(b)
        out.append(math.inf if m <= 0.0 else oracle.shifted.h_max / (2.0 * m) - 1.0)
    return out


def diagnostics(schedule: Schedule, model: Model | OffsetHamiltonian, *,
                tau: int | None = None, tau_prx: float | None = None,
                T: float | None = None, samples: int | None = None,
                bounds=None, seed=None) -> VarianceDiagnostics:
    """Variance diagnostics of the paired product estimator over ``schedule``.

    Exact moments are used whenever the model can be enumerated.  Otherwise
    ``samples`` trace pairs of length ``tau`` (default 1) per chain are drawn
    from warm-started Glauber chains using ``bounds(beta)`` and all quantities
    are plug-in estimates, with ``alpha1``, ``alpha0`` and ``eps0`` omitted.
    With ``tau`` given and ``|Omega|`` at most the trace-variance cap, exact
    relative trace variances are added.
    ``tau_prx`` and ``T`` enable ``eps0``.
    """
    sh = model if isinstance(model, OffsetHamiltonian) else shifted_hamiltonian(model)
    tensor = TensorEstimator(schedule, sh.h_min, sh.h_max)
    pairs = tensor.pairs
    try:
        oracle = LevelOracle(sh)
    except OracleUnavailableError:
        if samples is None:
            raise
        return _sampled_diagnostics(tensor, sh, tau or 1, samples, bounds, seed)
    mom = [oracle.pair_moments(p) for p in pairs]
    vf = [m["vrel_f"] for m in mom]
    vg = [m["vrel_g"] for m in mom]
    vF = math.expm1(math.fsum(math.log1p(v) for v in vf))
    vG = math.expm1(math.fsum(math.log1p(v) for v in vg))
    mu = math.prod(m["mean_f"] for m in mom)
    nu = math.prod(m["mean_g"] for m in mom)
    b0 = schedule.betas[0]
    Q = math.exp(oracle.log_q(b0, schedule.betas[-1]))
    aF, bF = tensor.range_F
    aG, bG = tensor.range_G
    relR = (bF - aF) / mu + (bG - aG) / nu
    relR_i = []
    for p, m in zip(pairs, mom):
        (af, bf), (ag, bg) = p.range_f, p.range_g
        relR_i.append((bf - af) / m["mean_f"] + (bg - ag) / m["mean_g"])
    alpha1 = math.exp(0.5 * (oracle.z(b0) - oracle.z(b0 - schedule.delta_max)))
    diag = VarianceDiagnostics(vf, vg, vF, vG, mu, nu, Q, relR, relR_i, alpha1,
                               _alpha0(oracle, schedule.betas[:-1]))
    if tau_prx is not None and T is not None:
        diag.eps0 = epsilon_zero_formula(tau_prx, T, Q, schedule.delta_total,
                                         sh.h_min, sh.h_max, alpha1)
    if tau is not None:
        from .oracle import TRACE_VARIANCE_CAP, exact_trace_variance
        if sh.base.n_states <= TRACE_VARIANCE_CAP:
            off = sh.offset
            for p in pairs:
                diag.reltrv_f.append(exact_trace_variance(
                    sh.base, p.beta_lo, lambda e, p=p: p.f(e + off), tau))
                diag.reltrv_g.append(exact_trace_variance(
                    sh.base, p.beta_hi, lambda e, p=p: p.g(e + off), tau))
    return diag


def _sampled_diagnostics(tensor, sh, tau, samples, bounds, seed):
    from .chains import GibbsChain, make_rng, spawn_rngs
    from .meanest import trace_variance_estimate

    if bounds is None:
        raise ParameterError("sample-based diagnostics need chain bounds")
    rngs = spawn_rngs(make_rng(seed), len(tensor.schedule.betas))
    betas = tensor.schedule.betas
    ests = {}
    for j, b in enumerate(betas):
        bd = bounds(b) if callable(bounds) else bounds
        chain = GibbsChain(sh.base, b, rngs[j], h_shift=-sh.offset)
        chain.advance(bd.t_unif)
        c1, c2 = chain.spawn(2)
        c1.advance(bd.t_unif)
        c2.advance(bd.t_unif)
        ests[j] = (c1, c2)
    vf, vg, mf, mg, rf, rg = [], [], [], [], [], []
    for i, p in enumerate(tensor.pairs):
        for j, coef, means, vrels, rtv in ((i, -p.half, mf, vf, rf),
                                           (i + 1, p.half, mg, vg, rg)):
            c1, c2 = ests[j]
            pt1 = c1.trace_averages(coef, samples, 1)
            pt2 = c2.trace_averages(2.0 * coef, samples, 1)
            m1 = float(pt1.mean())
            means.append(m1)
            vrels.append(max(float(pt2.mean()) / (m1 * m1) - 1.0, 0.0))
            a1 = c1.trace_averages(coef, samples, tau)
            a2 = c2.trace_averages(coef, samples, tau)
            mt = 0.5 * float(a1.mean() + a2.mean())
            rtv.append(trace_variance_estimate(a1, a2) / (mt * mt))
    mu, nu = math.prod(mf), math.prod(mg)
    vF = math.expm1(math.fsum(math.log1p(v) for v in vf))
    vG = math.expm1(math.fsum(math.log1p(v) for v in vg))
    Q = nu / mu
    aF, bF = tensor.range_F
    aG, bG = tensor.range_G
    relR_i = [(p.range_f[1] - p.range_f[0]) / a + (p.range_g[1] - p.range_g[0]) / b
              for p, a, b in zip(tensor.pairs, mf, mg)]
    # alpha1 and alpha0 need the partition function off the schedule; unavailable here
    diag = VarianceDiagnostics(vf, vg, vF, vG, mu, nu, Q,
                               (bF - aF) / mu + (bG - aG) / nu, relR_i,
                               math.nan, [], reltrv_f=rf, reltrv_g=rg,
                               source="samples")
    return diag
