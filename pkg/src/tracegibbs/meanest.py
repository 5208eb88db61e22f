"""Adaptive multiplicative MCMC mean estimation with trace averaging.

Two independent copies of a chain are warm-started from the same state, then
advanced in lock-step.  Every ``T`` steps each copy contributes the average of
``f`` over its last ``T`` states.  The sample count grows geometrically; after
each batch an empirical-Bernstein radius is turned into a certified relative
error, and the loop stops once that error is at most ``eps`` or the iteration
cap is reached.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .chains import relaxation_T, t_unif
from .errors import ParameterError, UnsupportedRangeError

SQRT21 = math.sqrt(21.0)


@dataclass(frozen=True)
class MeanEstConfig:
    a: float
    b: float
    eps: float
    delta: float
    Lambda: float
    pi_min: float = 1.0
    r: float = 1.1
    T: int | None = None
    cap_base: float | None = None
    log_pi_min: float | None = None

    def __post_init__(self):
        if not self.a <= self.b:
            raise ParameterError(f"need a <= b, got [{self.a}, {self.b}]")
        if self.a <= 0.0:
            raise UnsupportedRangeError(f"range lower end must be positive, got {self.a}")
        if not 0.0 < self.eps < 1.0:
            raise ParameterError(f"eps must be in (0, 1), got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must be in (0, 1), got {self.delta}")
        if not self.r > 1.0:
            raise ParameterError(f"ratio r must exceed 1, got {self.r}")
        if not 0.0 <= self.Lambda < 1.0:
            raise ParameterError(f"Lambda must be in [0, 1), got {self.Lambda}")
        if not 0.0 < self.pi_min <= 1.0:
            raise ParameterError(f"pi_min must be in (0, 1], got {self.pi_min}")
        if self.T is not None and self.T < 1:
            raise ParameterError("T must be >= 1")
        if self.cap_base is not None and not self.cap_base > 1.0:
            raise ParameterError("cap_base must exceed 1")

    @property
    def R(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class IterationRecord:
    i: int
    m: int
    mean: float
    var: float
    u: float
    eps_add: float
    mean_mult: float
    eps_mult: float
    steps: int


@dataclass
class MeanEstResult:
    mean: float
    eps: float
    steps: int
    cap_hit: bool
    T: int
    iterations: int
    I: int
    t_unif: int
    eps_hoeffding: float = math.inf
    log: list[IterationRecord] = field(default_factory=list)

    def log_rows(self) -> list[dict]:
        return [r.__dict__.copy() for r in self.log]

    def write_log(self, path_or_file) -> None:
        """Write the iteration log as CSV."""
        names = [f.name for f in fields(IterationRecord)]
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
        try:
            w = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
            w.writeheader()
            w.writerows(self.log_rows())
        finally:
            if own:
                fh.close()


@dataclass(frozen=True)
class Plan:
    """Quantities fixed before any sampling."""

    T: int
    lam_T: float
    I: int
    alpha: float
    log_term: float
    t_unif: int

    def sizes(self, r: float) -> list[int]:
        """``m_i = ceil(alpha r^i)``, forced to be at least 1 and strictly increasing."""
        out, prev = [], 0
        for i in range(1, self.I + 1):
            m = max(math.ceil(self.alpha * r ** i), prev + 1)
            out.append(m)
            prev = m
        return out


def plan(cfg: MeanEstConfig) -> Plan:
    T = cfg.T if cfg.T is not None else relaxation_T(cfg.Lambda)
    lam_T = 0.0 if cfg.Lambda == 0.0 else math.exp(T * math.log(cfg.Lambda))
    a, b, R, eps = cfg.a, cfg.b, cfg.R, cfg.eps
    ratio = b * R / (2.0 * a * a) * (1.0 - eps) ** 2 / ((1.0 + eps) * eps)
    I = 1
    if ratio > 0.0:
        base = cfg.r if cfg.cap_base is None else cfg.cap_base
        I = max(1, math.floor(math.log(ratio) / math.log(base) + 1e-12))
    log_term = math.log(3.0 * I / cfg.delta)
    alpha = (1.0 + lam_T) * R * log_term * (1.0 + eps) / ((1.0 - lam_T) * b * eps)
    return Plan(T, lam_T, I, alpha, log_term,
                t_unif(T, cfg.pi_min, cfg.log_pi_min))


def iteration_count(a, b, eps, base=2.0) -> int:
    """Iteration cap ``1 v floor(log_base(bR/(2a^2) (1-eps)^2/((1+eps) eps)))``."""
    return plan(MeanEstConfig(a, b, eps, 0.5, 0.0, r=base)).I


def trace_variance_estimate(avg1: np.ndarray, avg2: np.ndarray) -> float:
    """Half the mean squared difference of paired trace averages."""
    avg1 = np.asarray(avg1, dtype=np.float64)
    avg2 = np.asarray(avg2, dtype=np.float64)
    diff = avg1 - avg2
    return float(diff @ diff) / (2.0 * len(diff))


def variance_upper_bound(v: float, R: float, lam_T: float, m: int,
                         log_term: float) -> float:
    return (v + (11.0 + SQRT21) * (1.0 + lam_T / SQRT21) * R * R * log_term
            / ((1.0 - lam_T) * m)
            + math.sqrt((1.0 + lam_T) * R * R * v * log_term / ((1.0 - lam_T) * m)))


def bernstein_epsilon(u: float, R: float, lam_T: float, m: int,
                      log_term: float) -> float:
    return (10.0 * R * log_term / ((1.0 - lam_T) * m)
            + math.sqrt((1.0 + lam_T) * u * log_term / ((1.0 - lam_T) * m)))


def hoeffding_radius(lam: float, R: float, m: int, delta: float) -> float:
    """Deviation bound for the mean of ``m`` steps of a chain with eigenvalue bound ``lam``."""
    return math.sqrt(2.0 * (1.0 + lam) * (R * R / 4.0) * math.log(2.0 / delta)
                     / ((1.0 - lam) * m))


def bernstein_radius(lam: float, R: float, var: float, m: int, delta: float) -> float:
    ld = math.log(2.0 / delta)
    return (10.0 * R * ld / ((1.0 - lam) * m)
            + math.sqrt(2.0 * (1.0 + lam) * var * ld / ((1.0 - lam) * m)))


def rel_mean_est(chain, f, cfg: MeanEstConfig) -> MeanEstResult:
    """Estimate ``E_pi[f]`` to relative precision ``cfg.eps`` with probability ``1 - cfg.delta``.

    ``chain`` must provide ``spawn``, ``advance`` and ``trace_averages``;
    ``f`` is passed through to ``trace_averages`` unchanged.  The chain itself
    is only used as a template: two independent copies do the sampling.
    """
    p = plan(cfg)
    a, b, R = cfg.a, cfg.b, cfg.R
    c1, c2 = chain.spawn(2)
    c1.advance(p.t_unif)
    c2.advance(p.t_unif)
    sum_mean = 0.0
    sum_sq = 0.0
    m_prev = 0
    log = []
    for i, m in enumerate(p.sizes(cfg.r), start=1):
        n_new = m - m_prev
        f1 = c1.trace_averages(f, n_new, p.T)
        f2 = c2.trace_averages(f, n_new, p.T)
        sum_mean += math.fsum(f1) + math.fsum(f2)
        diff = f1 - f2
        sum_sq += float(diff @ diff)
        m_prev = m
        mu = sum_mean / (2.0 * m)
        v = sum_sq / (2.0 * m)
        u = variance_upper_bound(v, R, p.lam_T, m, p.log_term)
        e_add = bernstein_epsilon(u, R, p.lam_T, m, p.log_term)
        lo = max(mu - e_add, a)
        hi = min(mu + e_add, b)
        mu_x = 0.5 * (lo + hi)
        e_x = (hi - lo) / (2.0 * mu_x)
        steps = 2 * (p.t_unif + p.T * m)
        log.append(IterationRecord(i, m, mu, v, u, e_add, mu_x, e_x, steps))
        if i == p.I or e_x <= cfg.eps:
            # relative Hoeffding radius at the final size, for cap-hit diagnostics
            e_h = hoeffding_radius(p.lam_T, R, m, cfg.delta) / max(mu_x - hoeffding_radius(
                p.lam_T, R, m, cfg.delta), a)
            return MeanEstResult(mu_x, e_x, steps, e_x > cfg.eps, p.T, i, p.I,
                                 p.t_unif, e_h, log)
    raise AssertionError("unreachable")  # pragma: no cover
