"""End-to-end partition-function estimators.

Each method builds a TPA(k, d) cooling schedule, estimates
``Q = Z~(b_min)/Z~(b_max)`` for the shifted Hamiltonian and reports

    Z(b_max) = Z~(b_min) / Q * exp(-b_max * H_min)

where ``Z~(0) = |Omega|``.  ``superchain`` runs RelMeanEst on the product
chains for ``F`` and ``G``; ``parallel`` runs it per interval on single Gibbs
chains; ``baseline`` draws thinned warm-started samples with a fixed
Chebyshev-style sample count.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .chains import (ChainBounds, GibbsChain, ProductChain, StepCounter, make_rng,
                     product_bounds, spawn_rngs)
from .errors import ParameterError
from .estimators import TensorEstimator, epsilon_zero_formula
from .meanest import MeanEstConfig, MeanEstResult, rel_mean_est
from .models import Model, OffsetHamiltonian, shifted_hamiltonian
from .tpa import DEFAULT_D, ExactTPASampler, GibbsTPASampler, Schedule, tpa_schedule

METHODS = ("super", "parallel", "baseline")
DEFAULT_VBAR = 8.0
BASELINE_C = 2.0


# -- chain bounds ---------------------------------------------------------------

class OracleBounds:
    """Exact spectral bounds per ``beta``, cached."""

    def __init__(self, model: Model):
        from .oracle import oracle_bounds

        self.model = model
        self._get = lru_cache(maxsize=None)(lambda b: oracle_bounds(model, b))

    def __call__(self, beta: float) -> ChainBounds:
        return self._get(float(beta))


class FixedBounds:
    """The same user-supplied bounds at every ``beta``."""

    def __init__(self, bounds: ChainBounds):
        self.bounds = bounds

    def __call__(self, beta: float) -> ChainBounds:
        return self.bounds


def parse_bounds(spec: str, model: Model) -> Callable[[float], ChainBounds]:
    """``"oracle"`` or ``"manual:Lambda,T,pi_min"``."""
    if spec == "oracle":
        return OracleBounds(model)
    if spec.startswith("manual:"):
        try:
            lam, T, pmin = spec[len("manual:"):].split(",")
            return FixedBounds(ChainBounds(float(lam), int(T), float(pmin), "user"))
        except ValueError as exc:
            raise ParameterError(f"bad manual bounds {spec!r}: {exc}") from exc
    raise ParameterError(f"unknown bounds source {spec!r}")


def interval_bounds(bounds, beta_lo: float, beta_hi: float, n_grid: int = 5) -> Callable:
    """Bounds valid on the whole of ``[beta_lo, beta_hi]`` for the TPA sampler.

    Queried points are snapped up to a grid of ``n_grid`` values so the
    sampler needs only a handful of spectral computations; ``pi_min`` is
    taken at the grid point above, which is smaller than at ``beta``.
    """
    grid = np.linspace(beta_lo, beta_hi, n_grid)

    @lru_cache(maxsize=None)
    def at(j: int) -> ChainBounds:
        return bounds(float(grid[j]))

    lam = max(at(j).Lambda for j in range(n_grid))
    T = max(at(j).T for j in range(n_grid))

    def get(beta: float) -> ChainBounds:
        j = min(int(np.searchsorted(grid, beta, side="left")), n_grid - 1)
        b = at(j)
        return ChainBounds(lam, T, b.pi_min, b.provenance, b.log_pi_min)

    return get


# -- configuration and report ---------------------------------------------------

@dataclass
class PipelineConfig:
    model: Model
    beta_max: float
    eps: float = 0.1
    delta: float = 0.1
    beta_min: float = 0.0
    k: int | None = None
    d: int = DEFAULT_D
    bounds: str | ChainBounds | Callable = "oracle"
    seed: int | None = 0
    method: str = "super"
    r: float = 1.1
    T: int | None = None
    vbar: float = DEFAULT_VBAR
    tpa_backend: str = "gibbs"
    schedule: Schedule | None = None
    log_z_min: float | None = None

    def __post_init__(self):
        if not self.beta_min <= self.beta_max:
            raise ParameterError("need beta_min <= beta_max")
        if not 0.0 < self.eps < 1.0:
            raise ParameterError(f"eps must be in (0, 1), got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must be in (0, 1), got {self.delta}")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}")
        if self.tpa_backend not in ("gibbs", "exact"):
            raise ParameterError("tpa_backend must be 'gibbs' or 'exact'")
        if self.vbar <= 0.0:
            raise ParameterError("vbar must be positive")

    def bounds_fn(self) -> Callable[[float], ChainBounds]:
        b = self.bounds
        if isinstance(b, str):
            return parse_bounds(b, self.model)
        if isinstance(b, ChainBounds):
            return FixedBounds(b)
        return b


@dataclass
class EstimateReport:
    method: str
    Q_hat: float
    log_Z_hat: float
    log_Z_tilde_hat: float
    mu: list[float]
    nu: list[float]
    steps: int
    tpa_steps: int
    schedule: Schedule | None
    eps_cert: float
    cap_hit: bool
    wall_ms: float
    details: list[MeanEstResult] = field(default_factory=list, repr=False)

    @property
    def Z_hat(self) -> float:
        return math.exp(self.log_Z_hat)

    @property
    def schedule_len(self) -> int:
        return 0 if self.schedule is None else self.schedule.ell


# -- shared plumbing -------------------------------------------------------------

def _log_z_min(cfg: PipelineConfig, sh: OffsetHamiltonian) -> float:
    """``ln Z~(beta_min)``: exact ``ln |Omega|`` at zero, else the oracle."""
    if cfg.log_z_min is not None:
        return cfg.log_z_min
    if cfg.beta_min == 0.0:
        return math.log(sh.base.n_states)
    from .oracle import log_partition

    return log_partition(sh.base, cfg.beta_min) - sh.log_z_correction(cfg.beta_min)


def report_log_z(log_z_tilde: float, beta: float, sh: OffsetHamiltonian) -> float:
    """``ln Z(beta, H)`` from ``ln Z(beta, H~)``."""
    return log_z_tilde + sh.log_z_correction(beta)


def build_schedule(cfg: PipelineConfig, sh: OffsetHamiltonian, bounds, rng,
                   counter: StepCounter) -> Schedule:
    if cfg.schedule is not None:
        return cfg.schedule
    if cfg.tpa_backend == "exact":
        sampler = ExactTPASampler(sh, rng)
    else:
        sampler = GibbsTPASampler(sh.base,
                                  interval_bounds(bounds, cfg.beta_min, cfg.beta_max),
                                  rng, counter, h_shift=sh.raw_min)
    return tpa_schedule(sh, cfg.beta_min, cfg.beta_max, cfg.k, cfg.d, sampler)


def _finish(cfg, sh, method, log_q, mu, nu, counter, tpa_steps, schedule, eps_cert,
            cap_hit, t0, details) -> EstimateReport:
    lzt = _log_z_min(cfg, sh) - log_q
    return EstimateReport(method, math.exp(log_q), report_log_z(lzt, cfg.beta_max, sh),
                          lzt, mu, nu, counter.total, tpa_steps, schedule, eps_cert,
                          cap_hit, (time.perf_counter() - t0) * 1e3, details)


def _trivial(cfg, sh, method, t0) -> EstimateReport:
    return _finish(cfg, sh, method, 0.0, [], [], StepCounter(), 0, None, 0.0, False,
                   t0, [])


def _pair_error(e_mu: float, e_nu: float) -> float:
    """Relative error of ``nu/mu`` given relative errors of both factors."""
    return (1.0 + e_nu) / (1.0 - e_mu) - 1.0 if e_mu < 1.0 else math.inf


# -- methods ---------------------------------------------------------------------

def superchain_eps(eps: float) -> float:
    return eps / (2.0 + eps)


def parallel_eps(eps: float, ell: int) -> float:
    s = (1.0 + eps) ** (1.0 / ell)
    return (s - 1.0) / (s + 1.0)


def superchain_trace_gibbs(cfg: PipelineConfig) -> EstimateReport:
    t0 = time.perf_counter()
    sh = shifted_hamiltonian(cfg.model)
    if cfg.beta_max == cfg.beta_min:
        return _trivial(cfg, sh, "super", t0)
    bounds = cfg.bounds_fn()
    counter = StepCounter()
    r_tpa, r_f, r_g = spawn_rngs(make_rng(cfg.seed), 3)
    schedule = build_schedule(cfg, sh, bounds, r_tpa, counter)
    tpa_steps = counter.total
    tensor = TensorEstimator(schedule, sh.h_min, sh.h_max)
    eps1, delta1 = superchain_eps(cfg.eps), cfg.delta / 2.0

    def estimate(betas, coefs, rng, rng_range):
        b = product_bounds([bounds(x) for x in betas])
        chain = ProductChain(sh.base, betas, rng, h_shift=sh.raw_min, counter=counter)
        mcfg = MeanEstConfig(rng_range[0], rng_range[1], eps1, delta1, b.Lambda,
                             b.pi_min, cfg.r, cfg.T, log_pi_min=b.ln_pi_min)
        return rel_mean_est(chain, coefs, mcfg)

    rf = estimate(tensor.betas_f, tensor.coefs_f, r_f, tensor.range_F)
    rg = estimate(tensor.betas_g, tensor.coefs_g, r_g, tensor.range_G)
    log_q = math.log(rg.mean) - math.log(rf.mean)
    return _finish(cfg, sh, "super", log_q, [rf.mean], [rg.mean], counter, tpa_steps,
                   schedule, _pair_error(rf.eps, rg.eps), rf.cap_hit or rg.cap_hit,
                   t0, [rf, rg])


def parallel_trace_gibbs(cfg: PipelineConfig) -> EstimateReport:
    t0 = time.perf_counter()
    sh = shifted_hamiltonian(cfg.model)
    if cfg.beta_max == cfg.beta_min:
        return _trivial(cfg, sh, "parallel", t0)
    bounds = cfg.bounds_fn()
    counter = StepCounter()
    r_tpa, r_chains = spawn_rngs(make_rng(cfg.seed), 2)
    schedule = build_schedule(cfg, sh, bounds, r_tpa, counter)
    tpa_steps = counter.total
    ell = schedule.ell
    eps1, delta1 = parallel_eps(cfg.eps, ell), cfg.delta / (2.0 * ell)
    rngs = spawn_rngs(r_chains, 2 * ell)
    tensor = TensorEstimator(schedule, sh.h_min, sh.h_max)

    def estimate(beta, coef, rng, rng_range):
        b = bounds(beta)
        chain = GibbsChain(sh.base, beta, rng, h_shift=sh.raw_min, counter=counter)
        mcfg = MeanEstConfig(rng_range[0], rng_range[1], eps1, delta1, b.Lambda,
                             b.pi_min, cfg.r, cfg.T, log_pi_min=b.ln_pi_min)
        return rel_mean_est(chain, coef, mcfg)

    mus, nus, details = [], [], []
    log_q, err, cap = 0.0, 1.0, False
    for i, pair in enumerate(tensor.pairs):
        rf = estimate(pair.beta_lo, -pair.half, rngs[2 * i], pair.range_f)
        rg = estimate(pair.beta_hi, pair.half, rngs[2 * i + 1], pair.range_g)
        mus.append(rf.mean)
        nus.append(rg.mean)
        details += [rf, rg]
        log_q += math.log(rg.mean) - math.log(rf.mean)
        err *= 1.0 + _pair_error(rf.eps, rg.eps)
        cap = cap or rf.cap_hit or rg.cap_hit
    return _finish(cfg, sh, "parallel", log_q, mus, nus, counter, tpa_steps, schedule,
                   err - 1.0, cap, t0, details)


def baseline_sample_count(eps: float, delta: float, vbar: float = DEFAULT_VBAR,
                          c: float = BASELINE_C) -> int:
    """``ceil(c * vbar * ln(2/delta) / eps^2)``."""
    return math.ceil(c * vbar * math.log(2.0 / delta) / (eps * eps))


def baseline_tpa_ppe(cfg: PipelineConfig) -> EstimateReport:
    t0 = time.perf_counter()
    sh = shifted_hamiltonian(cfg.model)
    if cfg.beta_max == cfg.beta_min:
        return _trivial(cfg, sh, "baseline", t0)
    bounds = cfg.bounds_fn()
    counter = StepCounter()
    r_tpa, r_chains = spawn_rngs(make_rng(cfg.seed), 2)
    schedule = build_schedule(cfg, sh, bounds, r_tpa, counter)
    tpa_steps = counter.total
    eps1, delta1 = superchain_eps(cfg.eps), cfg.delta / 2.0
    n = baseline_sample_count(eps1, delta1, cfg.vbar)
    betas = schedule.betas
    half = 0.5 * schedule.deltas
    # one chain per schedule point; its draws feed f of the interval to its
    # right and g of the interval to its left
    log_f = np.zeros(n)
    log_g = np.zeros(n)
    for j, (beta, rng) in enumerate(zip(betas, spawn_rngs(r_chains, len(betas)))):
        b = bounds(beta)
        chain = GibbsChain(sh.base, beta, rng, h_shift=sh.raw_min, counter=counter)
        chain.advance(b.t_unif)
        h = chain.thinned_energies(n, max(1, b.t_unif))
        if j < len(half):
            log_f -= half[j] * h
        if j > 0:
            log_g += half[j - 1] * h
    # common shifts keep the sums in range before taking logs
    sf, sg = log_f.max(), log_g.max()
    mu_log = sf + math.log(math.fsum(np.exp(log_f - sf).tolist()) / n)
    nu_log = sg + math.log(math.fsum(np.exp(log_g - sg).tolist()) / n)
    log_q = nu_log - mu_log
    return _finish(cfg, sh, "baseline", log_q, [math.exp(mu_log)], [math.exp(nu_log)],
                   counter, tpa_steps, schedule, cfg.eps, False, t0, [])


RUNNERS = {"super": superchain_trace_gibbs, "parallel": parallel_trace_gibbs,
           "baseline": baseline_tpa_ppe}


def estimate(cfg: PipelineConfig) -> EstimateReport:
    return RUNNERS[cfg.method](cfg)


def epsilon_zero(cfg: PipelineConfig, diag, schedule: Schedule | None = None,
                 tau_prx: float | None = None, T: float | None = None) -> float:
    """Crossover precision below which the trace-variance term dominates.

    ``tau_prx`` defaults to the product chain's relaxation time from the
    configured bounds and ``T`` to the trace length RelMeanEst would use.
    """
    from .chains import relaxation_T

    sh = shifted_hamiltonian(cfg.model)
    if schedule is None:
        if diag.eps0 is not None and tau_prx is None and T is None:
            return diag.eps0
        raise ParameterError("a schedule is needed to compute eps0")
    bounds = cfg.bounds_fn()
    b = product_bounds([bounds(x) for x in schedule.betas[:-1]])
    if tau_prx is None:
        tau_prx = 1.0 / (1.0 - b.Lambda)
    if T is None:
        T = cfg.T if cfg.T is not None else relaxation_T(b.Lambda)
    return epsilon_zero_formula(tau_prx, T, diag.Q, schedule.delta_total, sh.h_min,
                                sh.h_max, diag.alpha1)
