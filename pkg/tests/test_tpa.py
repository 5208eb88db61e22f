import math

import numpy as np
import pytest

from conftest import brute_log_z
from tracegibbs.chains import make_rng
from tracegibbs.models import IsingModel, TableModel, shifted_hamiltonian
from tracegibbs.pipelines import OracleBounds, interval_bounds
from tracegibbs.tpa import (ExactTPASampler, GibbsTPASampler, Schedule, default_k,
                            tpa_next, tpa_schedule, tpa_single_run, uniform_schedule)


def shifted_log_q(energies, b0, b1):
    h = energies - energies.min()
    return brute_log_z(h, b0) - brute_log_z(h, b1)


def test_next_point_formula():
    assert tpa_next(0.3, 2.0, 0.5) == pytest.approx(0.3 + math.log(2) / 2)
    assert tpa_next(0.3, 0.0, 0.5) == math.inf


def test_constant_model_runs_empty():
    s = ExactTPASampler(TableModel([2, 2], [1.0] * 4), make_rng(0))
    assert all(tpa_single_run(0.0, 5.0, s) == [] for _ in range(20))
    sch = tpa_schedule(TableModel([2, 2], [1.0] * 4), 0.0, 5.0, k=3, d=1, seed=1)
    assert sch.betas == (0.0, 5.0)


def test_run_points_increasing_inside_interval():
    s = ExactTPASampler(IsingModel(2), make_rng(1))
    for _ in range(50):
        pts = tpa_single_run(0.1, 3.0, s)
        assert all(0.1 < p <= 3.0 for p in pts)
        assert all(a < b for a, b in zip(pts, pts[1:]))


def test_mean_run_length_is_log_q(ising2_energies):
    lq = shifted_log_q(ising2_energies, 0.0, 2.0)
    s = ExactTPASampler(IsingModel(2), make_rng(2))
    lens = np.array([len(tpa_single_run(0.0, 2.0, s)) for _ in range(2000)])
    # run lengths are Poisson(ln Q)
    assert abs(lens.mean() - lq) < 3 * math.sqrt(lq / len(lens))


def test_d1_k1_keeps_every_point():
    m = IsingModel(2)
    sch = tpa_schedule(m, 0.0, 2.0, k=1, d=1, seed=5)
    assert sch.betas[1:-1] == sch.runs[0]
    assert sch.betas[0] == 0.0 and sch.betas[-1] == 2.0


def test_schedule_structure():
    sch = tpa_schedule(IsingModel(3), 0.0, 1.5, k=4, d=3, seed=3)
    assert sch.k == 4 and sch.d == 3 and len(sch.runs) == 4
    merged = sorted(p for r in sch.runs for p in r)
    kept = list(sch.betas[1:-1])
    assert set(kept) <= set(merged)
    pos = [merged.index(b) for b in kept]
    assert all(b - a == 3 for a, b in zip(pos, pos[1:]))
    if pos:
        assert pos[0] < 3
    assert sch.ell == len(sch.betas) - 1
    np.testing.assert_allclose(sch.deltas.sum(), 1.5)


def test_schedule_length_mean(ising3_energies):
    lq = shifted_log_q(ising3_energies, 0.0, 1.0)
    k, d = 3, 4
    lens = np.array([tpa_schedule(IsingModel(3), 0.0, 1.0, k=k, d=d, seed=s).ell - 1
                     for s in range(1000)])
    assert abs(lens.mean() - k * lq / d) < 3 * lens.std() / math.sqrt(len(lens))


def test_schedule_seed_determinism():
    a = tpa_schedule(IsingModel(2), 0.0, 2.0, k=2, d=2, seed=9)
    b = tpa_schedule(IsingModel(2), 0.0, 2.0, k=2, d=2, seed=9)
    assert a.betas == b.betas


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule((0.0,), 1, 1)
    with pytest.raises(ValueError):
        Schedule((0.0, 0.5, 0.5), 1, 1)
    with pytest.raises(ValueError):
        tpa_schedule(IsingModel(2), 0.0, 1.0, k=0)
    with pytest.raises(ValueError):
        tpa_single_run(1.0, 1.0, ExactTPASampler(IsingModel(2)))


def test_default_k():
    assert default_k(4.0) == 2
    assert default_k(12.0) == 4
    assert default_k(0.5) == 1
    assert default_k(1.0) == 1


def test_uniform_schedule():
    s = uniform_schedule(0.0, 1.0, 4)
    assert s.ell == 4
    assert s.delta_max == pytest.approx(0.25)


def test_gibbs_backend_matches_exact_backend():
    from scipy.stats import ks_2samp

    m = IsingModel(2)
    sh = shifted_hamiltonian(m)
    bounds = interval_bounds(OracleBounds(m), 0.0, 2.0)
    gl = []
    ex = []
    for s in range(200):
        g = GibbsTPASampler(m, bounds, make_rng(s), h_shift=sh.raw_min)
        gl.append(tpa_schedule(sh, 0.0, 2.0, k=2, d=1, sampler=g).ell)
        ex.append(tpa_schedule(sh, 0.0, 2.0, k=2, d=1, seed=10_000 + s).ell)
    assert ks_2samp(gl, ex).pvalue > 0.01
