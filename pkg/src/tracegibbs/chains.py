"""Markov chains targeting Gibbs distributions.

``GibbsChain`` is heat-bath Glauber dynamics: each step picks a site uniformly
and redraws its label from the exact conditional law.  ``ProductChain`` runs
several Gibbs chains on the Cartesian product and advances one randomly chosen
component per step.  ``MatrixChain`` is a generic finite chain given by an
explicit transition matrix, used for small test chains.

Random streams are ``numpy.random.Generator(Philox)`` seeded from
``SeedSequence(root_seed, spawn_key=key)``, so every chain has an independent,
reproducible stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import EmptyTraceError, ParameterError
from .models import Model

_NO_VISIT = np.empty((0, 1), dtype=np.int64)
_NO_AVG = np.empty(0)


def make_rng(seed=None, *key: int) -> np.random.Generator:
    """Philox generator for ``(seed, key...)``; passes a Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def spawn_rngs(rng: np.random.Generator, k: int) -> list[np.random.Generator]:
    """Derive ``k`` independent child generators from ``rng``'s seed sequence."""
    return [np.random.Generator(np.random.Philox(s))
            for s in rng.bit_generator.seed_seq.spawn(k)]


@dataclass(frozen=True)
class ChainBounds:
    """A-priori spectral data of a chain.

    ``Lambda`` bounds the second-largest absolute eigenvalue, ``T`` bounds the
    relaxation/mixing time and ``pi_min`` lower-bounds the smallest stationary
    mass.
    """

    Lambda: float
    T: int
    pi_min: float
    provenance: str = "user"
    log_pi_min: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.Lambda < 1.0:
            raise ParameterError(f"Lambda must be in [0, 1), got {self.Lambda}")
        if self.T < 1:
            raise ParameterError(f"T must be >= 1, got {self.T}")
        if not 0.0 < self.pi_min <= 1.0:
            raise ParameterError(f"pi_min must be in (0, 1], got {self.pi_min}")

    @property
    def ln_pi_min(self) -> float:
        return math.log(self.pi_min) if self.log_pi_min is None else self.log_pi_min

    @property
    def t_unif(self) -> int:
        return t_unif(self.T, log_pi_min=self.ln_pi_min)


def t_unif(T: float, pi_min: float = 1.0, log_pi_min: float | None = None) -> int:
    """Warm-start length ``ceil(T ln(1/pi_min))``; ``log_pi_min`` avoids underflow."""
    lp = math.log(pi_min) if log_pi_min is None else log_pi_min
    return max(0, math.ceil(-T * lp))


def relaxation_T(Lambda: float) -> int:
    """``T = ceil((1 + L)/(1 - L) * ln sqrt 2)``, at least 1."""
    return max(1, math.ceil((1.0 + Lambda) / (1.0 - Lambda) * math.log(math.sqrt(2.0))))


def product_bounds(bounds: Sequence[ChainBounds],
                   weights: Sequence[float] | None = None) -> ChainBounds:
    """Spectral bounds of the weighted product of chains with nonnegative spectra.

    The product transition operator is ``sum_i w_i (I x .. x P_i x .. x I)``;
    its eigenvalues are ``sum_i w_i lambda_i`` over one eigenvalue per factor,
    so the second largest is ``1 - min_i w_i (1 - lambda_i)``.  Heat-bath
    Glauber chains are positive semidefinite, which makes that value the
    second-largest absolute eigenvalue as well.
    """
    ell = len(bounds)
    w = np.full(ell, 1.0 / ell) if weights is None else np.asarray(weights, float)
    gap = min(wi * (1.0 - b.Lambda) for wi, b in zip(w, bounds))
    lam = 1.0 - gap
    T = math.ceil(max(b.T / wi for wi, b in zip(w, bounds)))
    log_pi = math.fsum(b.ln_pi_min for b in bounds)
    prov = "oracle" if all(b.provenance == "oracle" for b in bounds) else "user"
    return ChainBounds(min(lam, float(np.nextafter(1.0, 0.0))), max(1, T),
                       max(math.exp(log_pi), 5e-324), prov, log_pi)


class ProductChain:
    """Weighted product of Glauber chains of one model at several temperatures.

    Component ``i`` targets ``pi_{betas[i]}``.  One step picks component ``i``
    with probability ``weights[i]`` and performs one Glauber step on it only.
    With a single component no selection draw is made, so a one-component
    product chain is step-for-step identical to a plain ``GibbsChain``.
    """

    def __init__(self, model: Model, betas: Sequence[float], seed=None,
                 weights: Sequence[float] | None = None, states=None,
                 h_shift: float | None = None, counter=None):
        self.model = model
        self.betas = np.array(betas, dtype=np.float64)
        ell = len(self.betas)
        if ell < 1:
            raise ParameterError("product chain needs at least one component")
        w = np.full(ell, 1.0 / ell) if weights is None else np.asarray(weights, float)
        if w.shape != (ell,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0):
            raise ParameterError("weights must be a probability vector")
        self.weights = w
        self._cumw = np.cumsum(w)
        self.rng = make_rng(seed)
        self._backend, self._params = model.kernel_spec()
        self._run = _kernels.RUNNERS[self._backend]
        self._radices = model.space.radices
        self._strides = model.space.strides
        if states is None:
            self.x = np.zeros((ell, model.n_sites), dtype=np.int64)
        else:
            self.x = np.array(states, dtype=np.int64).reshape(ell, model.n_sites)
        self.h = np.array([model.energy_idx(xi) for xi in self.x], dtype=np.float64)
        if h_shift is None:
            h_shift = model.energy_bounds()[0]
        self.h_shift = float(h_shift)
        self.steps = 0
        self.counter = counter

    @property
    def n_components(self) -> int:
        return len(self.betas)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.x @ self._strides)

    @property
    def shifted_energies(self) -> np.ndarray:
        return self.h - self.h_shift

    def spawn(self, k: int) -> list["ProductChain"]:
        """``k`` copies at the current state with independent child streams."""
        return [ProductChain(self.model, self.betas, rng, self.weights,
                             self.x.copy(), self.h_shift, self.counter)
                for rng in spawn_rngs(self.rng, k)]

    def _tick(self, n):
        self.steps += n
        if self.counter is not None:
            self.counter.add(n)

    def _call(self, n_steps, trace_len, coefs, avgs, visited, endpoint=False):
        if n_steps <= 0:
            return
        self._run(self._params, self._radices, self._strides, self.x, self.h,
                  self.betas, coefs, self.h_shift, self._cumw, self.rng,
                  n_steps, trace_len, avgs, visited, endpoint)
        self._tick(n_steps)

    def advance(self, n_steps: int) -> None:
        self._call(int(n_steps), 0, np.zeros(self.n_components), _NO_AVG, _NO_VISIT)

    def step(self):
        """One product step; returns the joint state as per-component indices."""
        self.advance(1)
        return self.indices

    def run_trace(self, length: int) -> np.ndarray:
        """Visited joint states after each of ``length`` steps, shape ``(length, ell)``."""
        if length < 1:
            raise EmptyTraceError("trace length must be >= 1")
        visited = np.empty((length, self.n_components), dtype=np.int64)
        self._call(length, 0, np.zeros(self.n_components), _NO_AVG, visited)
        return visited

    def trace_averages(self, coefs, n_traces: int, trace_len: int) -> np.ndarray:
        """Averages of ``exp(sum_i coefs[i] * H~(x_i))`` over consecutive traces."""
        coefs = np.asarray(coefs, dtype=np.float64)
        if coefs.shape != (self.n_components,):
            raise ParameterError("need one coefficient per component")
        avgs = np.empty(n_traces)
        self._call(n_traces * trace_len, trace_len, coefs, avgs, _NO_VISIT)
        return avgs


class GibbsChain(ProductChain):
    """Single-site heat-bath Glauber dynamics for ``pi_beta``."""

    def __init__(self, model: Model, beta: float, seed=None, state=None,
                 h_shift: float | None = None, counter=None):
        states = None if state is None else [np.asarray(state, dtype=np.int64)]
        super().__init__(model, [beta], seed, None, states, h_shift, counter)

    @property
    def beta(self) -> float:
        return float(self.betas[0])

    @beta.setter
    def beta(self, value: float) -> None:
        self.betas[0] = value

    @property
    def index(self) -> int:
        return self.indices[0]

    @property
    def state(self) -> np.ndarray:
        return self.x[0].copy()

    @property
    def energy(self) -> float:
        return float(self.h[0])

    def spawn(self, k: int) -> list["GibbsChain"]:
        return [GibbsChain(self.model, self.beta, rng, self.x[0].copy(),
                           self.h_shift, self.counter)
                for rng in spawn_rngs(self.rng, k)]

    def step(self) -> int:
        self.advance(1)
        return self.index

    def run_trace(self, length: int) -> np.ndarray:
        return super().run_trace(length)[:, 0]

    def trace_averages(self, coef, n_traces, trace_len):
        return super().trace_averages(np.atleast_1d(coef), n_traces, trace_len)

    def thinned_energies(self, n_samples: int, gap: int) -> np.ndarray:
        """Shifted energies ``H~`` observed after each of ``n_samples`` blocks of ``gap`` steps."""
        if gap < 1:
            raise ParameterError("gap must be >= 1")
        out = np.empty(n_samples)
        self._call(n_samples * gap, gap, np.ones(1), out, _NO_VISIT, True)
        return out


class MatrixChain:
    """Finite Markov chain with an explicit row-stochastic transition matrix."""

    def __init__(self, P, seed=None, state: int = 0, counter=None):
        P = np.asarray(P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ParameterError("transition matrix must be square")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0):
            raise ParameterError("transition matrix must be row-stochastic")
        self.P = P
        self._cum = np.cumsum(P, axis=1)
        self.rng = make_rng(seed)
        self.state = int(state)
        self.steps = 0
        self.counter = counter

    def spawn(self, k: int) -> list["MatrixChain"]:
        return [MatrixChain(self.P, rng, self.state, self.counter)
                for rng in spawn_rngs(self.rng, k)]

    def _call(self, n_steps, trace_len, values, avgs, visited):
        if n_steps <= 0:
            return
        self.state = int(_kernels.run_matrix_chain(
            self._cum, self.state, values, self.rng, n_steps, trace_len, avgs,
            visited))
        self.steps += n_steps
        if self.counter is not None:
            self.counter.add(n_steps)

    def advance(self, n_steps: int) -> None:
        self._call(int(n_steps), 0, _NO_AVG, _NO_AVG, _NO_VISIT[:, 0])

    def step(self) -> int:
        self.advance(1)
        return self.state

    def run_trace(self, length: int) -> np.ndarray:
        if length < 1:
            raise EmptyTraceError("trace length must be >= 1")
        visited = np.empty(length, dtype=np.int64)
        self._call(length, 0, _NO_AVG, _NO_AVG, visited)
        return visited

    def trace_averages(self, values, n_traces: int, trace_len: int) -> np.ndarray:
        """Averages of the per-state ``values`` over consecutive traces."""
        values = np.asarray(values, dtype=np.float64)
        avgs = np.empty(n_traces)
        self._call(n_traces * trace_len, trace_len, values, avgs, _NO_VISIT[:, 0])
        return avgs


class StepCounter:
    """Shared tally of Markov-chain steps across chains."""

    def __init__(self):
        self.total = 0

    def add(self, n: int) -> None:
        self.total += int(n)


def step(chain) -> int:
    return chain.step()


def product_step(chain: ProductChain):
    return chain.step()


def run_trace(chain, length: int) -> np.ndarray:
    return chain.run_trace(length)


def write_trace_csv(path, trace) -> None:
    """Dump a trace as CSV rows ``step,state`` (one column per component for products)."""
    import csv

    trace = np.asarray(trace)
    cols = ["state"] if trace.ndim == 1 else [f"state_{j}" for j in range(trace.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", *cols])
        for i, s in enumerate(trace.reshape(len(trace), -1), start=1):
            w.writerow([i, *s.tolist()])


def approx_sample(chain, bounds: ChainBounds):
    """Run ``T_unif`` steps from the chain's current state and return the state."""
    chain.advance(bounds.t_unif)
    return chain.index if hasattr(chain, "index") else chain.state
