"""Adaptive cooling schedules from the tootsie-pop process.

A single run walks upward from ``beta_min``: at the current point it draws
``X ~ pi_beta`` and ``U ~ Unif(0, 1]`` and jumps to ``beta - ln(U) / H~(X)``.
In ``z = ln Z`` coordinates the visited points form a rate-1 Poisson process,
so merging ``k`` runs and keeping every ``d``-th point gives a schedule whose
consecutive ``z`` gaps are sums of ``d`` exponential(rate ``k``) spacings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .chains import ChainBounds, GibbsChain, StepCounter, make_rng, spawn_rngs
from .models import Model, OffsetHamiltonian, shifted_hamiltonian

DEFAULT_D = 64


@dataclass(frozen=True)
class Schedule:
    """Increasing inverse temperatures ``beta_0 < ... < beta_ell``."""

    betas: tuple[float, ...]
    k: int
    d: int
    backend: str = "gibbs"
    hits: int = 0
    steps: int = 0
    runs: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    def __post_init__(self):
        b = self.betas
        if len(b) < 2:
            raise ValueError("a schedule needs at least two points")
        if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise ValueError("schedule must be strictly increasing")

    @property
    def ell(self) -> int:
        return len(self.betas) - 1

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(np.asarray(self.betas))

    @property
    def delta_max(self) -> float:
        return float(self.deltas.max())

    @property
    def delta_total(self) -> float:
        return self.betas[-1] - self.betas[0]


def default_k(h_max: float) -> int:
    """``ceil(log2 H_max)``, at least 1."""
    if h_max <= 1.0:
        return 1
    return max(1, math.ceil(math.log2(h_max)))


def uniform_schedule(beta_min: float, beta_max: float, ell: int) -> Schedule:
    """Evenly spaced schedule; a debugging aid, not an adaptive method."""
    betas = tuple(float(b) for b in np.linspace(beta_min, beta_max, ell + 1))
    return Schedule(betas, k=0, d=0, backend="uniform")


class ExactTPASampler:
    """Draws ``H~(X)`` with ``X`` exactly distributed as ``pi_beta``."""

    backend = "exact"

    def __init__(self, model: Model | OffsetHamiltonian, rng=None):
        shifted = model if isinstance(model, OffsetHamiltonian) else shifted_hamiltonian(model)
        self.shifted = shifted
        self.energies = shifted.energies()
        self.rng = make_rng(rng)
        self.steps = 0
        self._cdf = {}

    def with_rng(self, rng) -> "ExactTPASampler":
        new = object.__new__(ExactTPASampler)
        new.shifted, new.energies, new._cdf = self.shifted, self.energies, self._cdf
        new.rng, new.steps = make_rng(rng), 0
        return new

    def __call__(self, beta: float) -> float:
        cdf = self._cdf.get(beta)
        if cdf is None:
            logw = -beta * self.energies
            w = np.exp(logw - logw.max())
            cdf = np.cumsum(w)
            cdf /= cdf[-1]
        i = int(np.searchsorted(cdf, self.rng.random(), side="right"))
        return float(self.energies[i])


class GibbsTPASampler:
    """Approximate ``pi_beta`` samples from one warm-started Glauber chain.

    The chain persists across calls; each draw retargets it to the requested
    ``beta`` and runs ``T_unif`` steps.
    """

    backend = "gibbs"

    def __init__(self, model: Model, bounds: ChainBounds | Callable[[float], ChainBounds],
                 rng=None, counter: StepCounter | None = None,
                 h_shift: float | None = None):
        self.model = model
        self.bounds = bounds
        self.counter = counter
        self.h_shift = model.energy_bounds()[0] if h_shift is None else h_shift
        self.rng = make_rng(rng)
        self.chain = GibbsChain(model, 0.0, self.rng, h_shift=self.h_shift,
                                counter=counter)

    @property
    def steps(self) -> int:
        return self.chain.steps

    def with_rng(self, rng) -> "GibbsTPASampler":
        return GibbsTPASampler(self.model, self.bounds, rng, self.counter, self.h_shift)

    def __call__(self, beta: float) -> float:
        b = self.bounds(beta) if callable(self.bounds) else self.bounds
        self.chain.beta = beta
        self.chain.advance(b.t_unif)
        return self.chain.energy - self.h_shift


def tpa_next(beta: float, h: float, u: float) -> float:
    """Next point of a run: ``beta - ln(u)/h``, or ``+inf`` when ``h == 0``."""
    if h <= 0.0:
        return math.inf
    return beta - math.log(u) / h


def tpa_single_run(beta_min: float, beta_max: float, sampler) -> list[float]:
    """One run of the original process; returns its hit points in ``(beta_min, beta_max]``."""
    if not beta_min < beta_max:
        raise ValueError("need beta_min < beta_max")
    points = []
    beta = beta_min
    while True:
        h = sampler(beta)
        u = 1.0 - sampler.rng.random()
        nxt = tpa_next(beta, h, u)
        if not nxt <= beta_max:
            return points
        points.append(nxt)
        beta = nxt


def tpa_schedule(model: Model, beta_min: float, beta_max: float,
                 k: int | None = None, d: int = DEFAULT_D, sampler=None,
                 seed=None) -> Schedule:
    """Merge ``k`` independent runs and keep every ``d``-th point.

    The offset of the first kept point is uniform on ``{0, .., d-1}``; when it
    exceeds the number of merged points nothing is kept, so each merged point
    survives with probability exactly ``1/d``.
    """
    shifted = model if isinstance(model, OffsetHamiltonian) else shifted_hamiltonian(model)
    if k is None:
        k = default_k(shifted.h_max)
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    if sampler is None:
        sampler = ExactTPASampler(shifted)
    root = make_rng(seed) if seed is not None else sampler.rng
    children = spawn_rngs(root, k + 1)
    runs, steps = [], 0
    for r in range(k):
        s = sampler.with_rng(children[r])
        runs.append(tuple(tpa_single_run(beta_min, beta_max, s)))
        steps += s.steps
    merged = sorted((b, r, j) for r, run in enumerate(runs) for j, b in enumerate(run))
    offset = int(children[k].integers(0, d))
    kept = [b for b, _, _ in merged[offset::d] if beta_min < b < beta_max]
    betas = (float(beta_min), *kept, float(beta_max))
    return Schedule(betas, k, d, sampler.backend, len(merged), steps, tuple(runs))
