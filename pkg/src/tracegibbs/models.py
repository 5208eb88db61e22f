"""Discrete factor-graph models and their Hamiltonians.

States are assignments of one label per site.  Internally a state is stored as
a vector of label *indices* (position of the label inside the site's domain),
and the whole state space is enumerated with a mixed-radix index that is
little-endian in site order: site 0 is the least significant digit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidStateError, ModelFormatError, OracleUnavailableError

#: Models with at most this many states get a precomputed energy table for the
#: sampling kernels.
TABLE_CAP = 1 << 20

#: Default enumeration cap for the oracle.
ENUMERATION_CAP = 1 << 24

_CHUNK = 1 << 18


@dataclass(frozen=True)
class SiteSpace:
    """Per-site label domains of a model."""

    domains: tuple[tuple, ...]

    def __post_init__(self):
        if any(len(d) == 0 for d in self.domains):
            raise ValueError("every site domain must be nonempty")

    @property
    def n_sites(self) -> int:
        return len(self.domains)

    @property
    def radices(self) -> np.ndarray:
        return np.array([len(d) for d in self.domains], dtype=np.int64)

    @property
    def strides(self) -> np.ndarray:
        r = self.radices
        s = np.ones(len(r), dtype=np.int64)
        if len(r) > 1:
            s[1:] = np.cumprod(r[:-1])
        return s

    @property
    def n_states(self) -> int:
        return math.prod(len(d) for d in self.domains)

    def to_indices(self, labels: Sequence) -> np.ndarray:
        if len(labels) != self.n_sites:
            raise InvalidStateError(
                f"state has {len(labels)} sites, model has {self.n_sites}")
        out = np.empty(self.n_sites, dtype=np.int64)
        for i, (lab, dom) in enumerate(zip(labels, self.domains)):
            try:
                out[i] = dom.index(lab)
            except ValueError:
                raise InvalidStateError(
                    f"label {lab!r} not in domain {dom} of site {i}") from None
        return out

    def to_labels(self, indices: Sequence[int]) -> tuple:
        return tuple(dom[int(k)] for dom, k in zip(self.domains, indices))

    def encode(self, indices: Sequence[int]) -> int:
        return int(np.dot(np.asarray(indices, dtype=np.int64), self.strides))

    def decode(self, index: int) -> np.ndarray:
        index = int(index)
        if not 0 <= index < self.n_states:
            raise InvalidStateError(f"state index {index} out of range")
        return (index // self.strides) % self.radices

    def decode_many(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        return ((indices[:, None] // self.strides[None, :])
                % self.radices[None, :]).astype(np.int8)


class Model:
    """Base class: a finite-domain Hamiltonian over ``n_sites`` discrete sites."""

    kind: str = ""
    space: SiteSpace

    @property
    def n_sites(self) -> int:
        return self.space.n_sites

    @property
    def n_states(self) -> int:
        return self.space.n_states

    def energy(self, state: Sequence) -> float:
        """Raw Hamiltonian of a state given as a sequence of labels."""
        return self.energy_idx(self.space.to_indices(state))

    def energy_idx(self, x: np.ndarray) -> float:
        return float(self._energies_batch(np.asarray(x, dtype=np.int8)[None, :])[0])

    def _energies_batch(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def energy_bounds(self) -> tuple[float, float]:
        """Exact (H_min, H_max)."""
        e = self.energies(cap=ENUMERATION_CAP)
        return float(e.min()), float(e.max())

    def energies(self, cap: int = ENUMERATION_CAP) -> np.ndarray:
        """Energies of every state, indexed by mixed-radix state index."""
        n = self.n_states
        if n > cap:
            raise OracleUnavailableError(
                f"|Omega| = {n} exceeds enumeration cap {cap}")
        out = np.empty(n, dtype=np.float64)
        for lo in range(0, n, _CHUNK):
            idx = np.arange(lo, min(n, lo + _CHUNK), dtype=np.int64)
            out[lo:lo + len(idx)] = self._energies_batch(self.space.decode_many(idx))
        return out

    def kernel_spec(self) -> tuple[str, tuple]:
        """Backend name and parameter arrays for the sampling kernels."""
        if self.n_states <= TABLE_CAP:
            return "table", (self.energies(cap=TABLE_CAP), self.space.strides)
        raise NotImplementedError(
            f"{type(self).__name__} with {self.n_states} states has no local kernel")

    def to_dict(self) -> dict:
        raise NotImplementedError


class IsingModel(Model):
    """Ferromagnetic Ising model on an ``side x side`` grid with open boundaries.

    ``H(x) = -#{edges (i, j) : x_i = x_j}``; spins take values in {-1, +1}.
    """

    kind = "ising"

    def __init__(self, side: int):
        if side < 1:
            raise ValueError("side must be >= 1")
        self.side = int(side)
        self.space = SiteSpace(((-1, 1),) * (self.side * self.side))
        edges = []
        for r in range(self.side):
            for c in range(self.side):
                i = r * self.side + c
                if c + 1 < self.side:
                    edges.append((i, i + 1))
                if r + 1 < self.side:
                    edges.append((i, i + self.side))
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        nbrs = [[] for _ in range(self.n_sites)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self.nbr_ptr = np.zeros(self.n_sites + 1, dtype=np.int64)
        self.nbr_ptr[1:] = np.cumsum([len(v) for v in nbrs])
        self.nbr_idx = np.array([j for v in nbrs for j in v], dtype=np.int64)

    def __repr__(self):
        return f"IsingModel(side={self.side})"

    def adjacency(self) -> list[list[int]]:
        return [self.nbr_idx[self.nbr_ptr[i]:self.nbr_ptr[i + 1]].tolist()
                for i in range(self.n_sites)]

    def _energies_batch(self, xs):
        if len(self.edges) == 0:
            return np.zeros(len(xs))
        agree = xs[:, self.edges[:, 0]] == xs[:, self.edges[:, 1]]
        return -agree.sum(axis=1).astype(np.float64)

    def energy_bounds(self):
        # aligned spins give -|E|; the checkerboard coloring of the bipartite grid gives 0
        return -float(len(self.edges)), 0.0

    def kernel_spec(self):
        if self.n_states <= TABLE_CAP:
            return super().kernel_spec()
        return "ising", (self.nbr_ptr, self.nbr_idx)

    def to_dict(self):
        return {"kind": self.kind, "side": self.side}


class VotingModel(Model):
    """Logical voting model.

    Sites are ordered ``(Q, T_1..T_n, F_1..F_n)`` with ``Q`` in {-1, 1} and
    voters in {0, 1}::

        H = w Q max_i T_i - w Q max_i F_i + sum_i wT_i T_i + sum_i wF_i F_i
    """

    kind = "voting"

    def __init__(self, n: int, omega: float, omega_T: Sequence[float],
                 omega_F: Sequence[float]):
        if n < 1:
            raise ValueError("n must be >= 1")
        if len(omega_T) != n or len(omega_F) != n:
            raise ValueError("omega_T and omega_F must have length n")
        weights = [omega, *omega_T, *omega_F]
        if any(not -1.0 <= w <= 1.0 for w in weights):
            raise ValueError("all weights must lie in [-1, 1]")
        self.n = int(n)
        self.omega = float(omega)
        self.omega_T = np.array(omega_T, dtype=np.float64)
        self.omega_F = np.array(omega_F, dtype=np.float64)
        self.space = SiteSpace(((-1, 1),) + ((0, 1),) * (2 * self.n))

    def __repr__(self):
        return (f"VotingModel(n={self.n}, omega={self.omega}, "
                f"omega_T={self.omega_T.tolist()}, omega_F={self.omega_F.tolist()})")

    def _energies_batch(self, xs):
        n = self.n
        q = 2.0 * xs[:, 0] - 1.0
        t = xs[:, 1:n + 1].astype(np.float64)
        f = xs[:, n + 1:].astype(np.float64)
        return (self.omega * q * t.max(axis=1) - self.omega * q * f.max(axis=1)
                + t @ self.omega_T + f @ self.omega_F)

    @staticmethod
    def _block_extremes(w: np.ndarray, active: int) -> tuple[float, float]:
        # min/max of sum_i w_i v_i over v in {0,1}^n subject to max_i v_i == active
        if not active:
            return 0.0, 0.0
        neg, pos = w[w < 0], w[w > 0]
        lo = float(neg.sum()) if len(neg) else float(w.min())
        hi = float(pos.sum()) if len(pos) else float(w.max())
        return lo, hi

    def energy_bounds(self):
        lo, hi = math.inf, -math.inf
        for q in (-1.0, 1.0):
            for mt in (0, 1):
                for mf in (0, 1):
                    base = self.omega * q * (mt - mf)
                    tl, th = self._block_extremes(self.omega_T, mt)
                    fl, fh = self._block_extremes(self.omega_F, mf)
                    lo = min(lo, base + tl + fl)
                    hi = max(hi, base + th + fh)
        return lo, hi

    def kernel_spec(self):
        if self.n_states <= TABLE_CAP:
            return super().kernel_spec()
        return "voting", (np.array([self.omega]), self.omega_T, self.omega_F)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "omega": self.omega,
                "omega_T": self.omega_T.tolist(), "omega_F": self.omega_F.tolist()}


class TableModel(Model):
    """Model given by an explicit energy per state (mixed-radix order)."""

    kind = "table"

    def __init__(self, domain_sizes: Sequence[int], energies: Sequence[float]):
        sizes = [int(k) for k in domain_sizes]
        self.space = SiteSpace(tuple(tuple(range(k)) for k in sizes))
        e = np.asarray(energies, dtype=np.float64)
        if e.shape != (self.space.n_states,):
            raise ValueError(
                f"expected {self.space.n_states} energies, got {e.shape}")
        self._table = e

    def __repr__(self):
        return f"TableModel(domain_sizes={self.space.radices.tolist()})"

    def _energies_batch(self, xs):
        idx = xs.astype(np.int64) @ self.space.strides
        return self._table[idx]

    def energies(self, cap=ENUMERATION_CAP):
        return self._table.copy()

    def energy_bounds(self):
        return float(self._table.min()), float(self._table.max())

    def to_dict(self):
        return {"kind": self.kind, "domain_sizes": self.space.radices.tolist(),
                "energies": self._table.tolist()}


@dataclass(frozen=True)
class OffsetHamiltonian:
    """A model shifted by a constant so that its minimum energy is zero.

    ``H~(x) = H(x) + offset`` with ``offset = -H_min``; the raw partition
    function is recovered as ``Z(beta, H) = Z(beta, H~) * exp(beta * offset)``.
    """

    base: Model
    offset: float
    h_min: float = field(default=0.0)
    h_max: float = field(default=0.0)

    @property
    def space(self) -> SiteSpace:
        return self.base.space

    @property
    def raw_min(self) -> float:
        return -self.offset

    def energy(self, state: Sequence) -> float:
        return self.base.energy(state) + self.offset

    def energy_idx(self, x) -> float:
        return self.base.energy_idx(x) + self.offset

    def energies(self, cap: int = ENUMERATION_CAP) -> np.ndarray:
        return self.base.energies(cap) + self.offset

    def log_z_correction(self, beta: float) -> float:
        """``ln Z(beta, H) - ln Z(beta, H~)``."""
        return beta * self.offset


def eval_hamiltonian(model: Model, state: Sequence) -> float:
    """Raw (unshifted) energy of a labelled state."""
    return model.energy(state)


def shifted_hamiltonian(model: Model) -> OffsetHamiltonian:
    h_min, h_max = model.energy_bounds()
    return OffsetHamiltonian(model, offset=-h_min, h_min=0.0, h_max=h_max - h_min)


def conditional_weights(model: Model, state: Sequence, site: int,
                        beta: float) -> np.ndarray:
    """Gibbs conditional law of ``site`` given the rest of ``state``.

    Returned in the order of the site's domain.
    """
    x = model.space.to_indices(state)
    if not 0 <= site < model.n_sites:
        raise IndexError(f"site {site} out of range for {model.n_sites} sites")
    k = len(model.space.domains[site])
    xs = np.repeat(x[None, :], k, axis=0).astype(np.int8)
    xs[:, site] = np.arange(k)
    e = model._energies_batch(xs)
    logw = -beta * (e - e.min())
    w = np.exp(logw - logw.max())
    return w / w.sum()


# -- model definition files -------------------------------------------------

def model_from_dict(d: dict) -> Model:
    try:
        kind = d["kind"]
        if kind == "ising":
            return IsingModel(d["side"])
        if kind == "voting":
            return VotingModel(d["n"], d["omega"], d["omega_T"], d["omega_F"])
        if kind == "table":
            return TableModel(d["domain_sizes"], d["energies"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad model definition: {exc}") from exc
    raise ModelFormatError(f"unknown model kind {d.get('kind')!r}")


def dumps_model(model: Model) -> str:
    return json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n"


def load_model(path: str | Path) -> Model:
    text = Path(path).read_text(encoding="utf-8")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    return model_from_dict(d)


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def fig3_voting_model() -> VotingModel:
    """The fixed voting model used for the complexity-vs-precision experiments."""
    return VotingModel(3, 0.9, [0.2, 0.5, 0.1], [-0.8, -0.2, -0.9])
