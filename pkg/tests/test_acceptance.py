"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records a one-line verdict; the lines are printed at the end of
the pytest run and also when this file is executed directly.
"""

import math
import statistics
from functools import lru_cache

import numpy as np

from tracegibbs.chains import MatrixChain, make_rng
from tracegibbs.estimators import EstimatorPair, diagnostics
from tracegibbs.meanest import MeanEstConfig, rel_mean_est
from tracegibbs.models import (IsingModel, TableModel, VotingModel, fig3_voting_model,
                               shifted_hamiltonian)
from tracegibbs.oracle import (exact_partition, exact_sample, gibbs_distribution,
                               log_partition, matrix_spectral, relative_trace_variance_matrix,
                               relative_variance, spectral, stationary, trace_moments,
                               transition_matrix)
from tracegibbs.pipelines import PipelineConfig, estimate
from tracegibbs.estimators import LevelOracle
from tracegibbs.sweep import cell_seed
from tracegibbs.tpa import ExactTPASampler, Schedule, tpa_schedule, tpa_single_run

RESULTS: dict[int, tuple[bool, str]] = {}
METHODS = ("super", "parallel", "baseline")


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


def verdict_lines() -> list[str]:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'}  {d}"
            for n, (ok, d) in sorted(RESULTS.items())]


def small_models():
    return {"ising2": IsingModel(2), "ising3": IsingModel(3), "voting": fig3_voting_model()}


# -- 1 and 8 -------------------------------------------------------------------

FPRAS_CASES = [("ising2", 0.05), ("ising2", 0.01), ("ising3", 0.05), ("ising3", 0.01),
               ("voting", 0.1)]
RUNS = 100


@lru_cache(maxsize=None)
def fpras_hits(name: str, beta: float, method: str) -> tuple[int, int]:
    model = small_models()[name]
    lz = log_partition(model, beta)
    hits = 0
    for rep in range(RUNS):
        seed = cell_seed(1, name, method, beta, rep)
        r = estimate(PipelineConfig(model, beta, 0.1, 0.1, method=method, seed=seed))
        hits += abs(math.expm1(r.log_Z_hat - lz)) <= 0.1
    return hits, RUNS


def test_criterion_1_fpras_contract():
    bad = []
    worst = RUNS
    for name, beta in FPRAS_CASES:
        for method in METHODS:
            h, n = fpras_hits(name, beta, method)
            worst = min(worst, h)
            if h < 85:
                bad.append(f"{name}@{beta}/{method}={h}")
    record(1, not bad, f"min hits {worst}/{RUNS} over {len(FPRAS_CASES) * 3} cells"
           + (f"; below 85: {bad}" if bad else ""))


def test_criterion_8_offset_identity():
    mismatches = []
    for side in (2, 3):
        m = IsingModel(side)
        sh = shifted_hamiltonian(m)
        table = TableModel([2] * m.n_sites, list(sh.energies()))
        for method in METHODS:
            for seed in range(3):
                raw = estimate(PipelineConfig(m, 0.05, method=method, seed=seed))
                pre = estimate(PipelineConfig(table, 0.05, method=method, seed=seed))
                if not (raw.log_Z_tilde_hat == pre.log_Z_hat
                        and raw.log_Z_hat == pre.log_Z_hat + 0.05 * sh.offset):
                    mismatches.append((side, method, seed))
    cover = [fpras_hits(n, b, meth)[0] for n, b in FPRAS_CASES if n.startswith("ising")
             for meth in METHODS]
    ok = not mismatches and min(cover) >= 85
    record(8, ok, f"bit-identical on {18 - len(mismatches)}/18 paired runs; "
                  f"raw-H Ising min coverage {min(cover)}/{RUNS}")


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_oracle_exactness():
    models = list(small_models().values()) + [
        TableModel([3, 2], [0.0, 0.3, 1.1, 0.7, 2.0, 0.1]), VotingModel(2, 0.5, [0.1, 0.4],
                                                                        [-0.3, -0.6])]
    z0 = all(exact_partition(m, 0.0).Z == m.n_states for m in models)
    s = exact_partition(IsingModel(2), 0.05)
    target = 2 * math.exp(0.2) + 12 * math.exp(0.1) + 2
    rel = abs(s.Z / target - 1)
    hist = s.histogram == {-4.0: 2, -2.0: 12, 0.0: 2}
    record(2, z0 and hist and rel <= 1e-12,
           f"Z(0)=|Omega| on {len(models)} models: {z0}; histogram ok: {hist}; "
           f"Z(0.05) rel err {rel:.1e}")


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_tpa_statistics():
    m = IsingModel(3)
    sh = shifted_hamiltonian(m)
    lo = LevelOracle(m)
    b1 = 1.0
    lq = lo.z(0.0) - lo.z(b1)
    sampler = ExactTPASampler(sh, make_rng(31))
    lens = np.array([len(tpa_single_run(0.0, b1, sampler)) for _ in range(2000)])
    ok_run = abs(lens.mean() - lq) < 3 * math.sqrt(lq / len(lens))

    k, d = 3, 4
    gaps = []
    ells = []
    for s in range(2000):
        sch = tpa_schedule(sh, 0.0, b1, k=k, d=d, seed=10_000 + s)
        ells.append(sch.ell - 1)
        z = [lo.z(b) for b in sch.betas]
        gaps += [z[i] - z[i + 1] for i in range(len(z) - 1)]
    ells = np.array(ells)
    ok_len = abs(ells.mean() - k * lq / d) < 3 * ells.std() / math.sqrt(len(ells))
    gaps = np.array(gaps)
    tail_ok = []
    for e in (0.5, 1.0, 2.0):
        bound = 1 - (1 - math.exp(-e * k / d)) ** d
        emp = float((gaps > e).mean())
        slack = 3 * math.sqrt(max(bound * (1 - bound), 1e-12) / len(gaps))
        tail_ok.append(emp <= bound + slack)
    record(3, ok_run and ok_len and all(tail_ok),
           f"run length {lens.mean():.4f} vs lnQ {lq:.4f}; interior points "
           f"{ells.mean():.4f} vs k lnQ/d {k * lq / d:.4f}; tail bound at 0.5/1/2: {tail_ok}")


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_estimator_identities():
    n = 10 ** 5
    rng = make_rng(41)
    worst = 0.0
    for m in small_models().values():
        sh = shifted_hamiltonian(m)
        h = sh.energies()
        lo = LevelOracle(m)
        for b0, b1 in ((0.0, 0.3), (0.2, 1.0)):
            p = EstimatorPair(b0, b1, sh.h_min, sh.h_max)
            mid = 0.5 * (b0 + b1)
            f = p.f(h[exact_sample(m, b0, rng, size=n)])
            g = p.g(h[exact_sample(m, b1, rng, size=n)])
            for est, target in ((f, math.exp(lo.z(mid) - lo.z(b0))),
                                (g, math.exp(lo.z(mid) - lo.z(b1)))):
                worst = max(worst, abs(est.mean() - target) / (est.std() / math.sqrt(n)))
    prod_err = 0.0
    for m in small_models().values():
        dg = diagnostics(Schedule((0.0, 0.15, 0.4, 0.9, 1.6), 1, 1), m)
        prod_err = max(prod_err, abs(dg.vrel_F + 1 - math.prod(v + 1 for v in dg.vrel_f)))
    record(4, worst < 3 and prod_err <= 1e-9,
           f"max |z-score| of E[f], E[g] {worst:.2f}; product identity gap {prod_err:.1e}")


# -- 5 -------------------------------------------------------------------------

def test_criterion_5_relmeanest():
    P = np.array([[0.7, 0.3], [0.4, 0.6]])
    pi = stationary(P)
    f = np.array([1.0, math.exp(-0.5)])
    mu = float(pi @ f)
    cfg = MeanEstConfig(math.exp(-0.5), 1.0, 0.1, 0.1, 0.3, pi_min=float(pi.min()))
    root = make_rng(51)
    hits = 0
    for _ in range(200):
        r = rel_mean_est(MatrixChain(P, seed=root.integers(2 ** 63)), f, cfg)
        hits += (1 - r.eps) * r.mean <= mu <= (1 + r.eps) * r.mean
    cov_ok = hits / 200 >= 0.85

    from tracegibbs.meanest import trace_variance_estimate

    m = IsingModel(2)
    beta = 0.4
    Pm = transition_matrix(m, beta)
    pim = gibbs_distribution(m, beta)
    T = math.ceil(spectral(m, beta).tau_rx)
    vals = np.exp(-0.2 * shifted_hamiltonian(m).energies())
    mean, second = trace_moments(Pm, pim, vals, T)
    target = second - mean ** 2
    c1, c2 = MatrixChain(Pm, seed=52).spawn(2)
    c1.advance(1000)
    c2.advance(1000)
    vs = np.array([trace_variance_estimate(c1.trace_averages(vals, 2000, T),
                                           c2.trace_averages(vals, 2000, T))
                   for _ in range(50)])
    z = abs(vs.mean() - target) / (vs.std() / math.sqrt(len(vs)))
    record(5, cov_ok and z < 3,
           f"coverage {hits}/200; trace-variance z-score {z:.2f} at T={T}")


# -- 6 -------------------------------------------------------------------------

def test_criterion_6_variance_inequalities():
    models = [IsingModel(2), VotingModel(2, 0.5, [0.1, 0.4], [-0.3, -0.6]),
              TableModel([3, 2], [0.0, 0.3, 1.1, 0.7, 2.0, 0.1])]
    checked = 0
    bad = []
    for m in models:
        assert m.n_states <= 64
        h = shifted_hamiltonian(m).energies()
        for beta in (0.05, 0.5, 1.5):
            P = transition_matrix(m, beta)
            pi = gibbs_distribution(m, beta)
            t_rx = math.ceil(spectral(m, beta).tau_rx)
            for c in (-0.25, -1.0, 0.5):
                f = np.exp(c * h)
                v = relative_variance(pi, f)
                rt = {t: relative_trace_variance_matrix(P, pi, f, t)
                      for t in sorted({1, 2, 4, 8, t_rx, 2 * t_rx, 4 * t_rx, 8 * t_rx})}
                for t in (1, 2, 4, 8, t_rx):
                    checked += 1
                    if rt[t] > v + 1e-12:
                        bad.append((repr(m), beta, c, t))
                for t in (t_rx, 2 * t_rx, 4 * t_rx, 8 * t_rx):
                    checked += 1
                    if rt[t] > 2 * (t_rx / t) * (rt[t_rx] + 1) + 1e-12:
                        bad.append((repr(m), beta, c, t, "decay"))
    record(6, not bad, f"{checked - len(bad)}/{checked} inequalities hold")


# -- 7 -------------------------------------------------------------------------

@lru_cache(maxsize=None)
def voting_steps(method: str, eps: float, n: int = 20) -> tuple[int, ...]:
    m = fig3_voting_model()
    return tuple(estimate(PipelineConfig(m, 0.1, eps, 0.1, method=method,
                                         seed=cell_seed(7, "voting", "paired", 0.0, s))).steps
                 for s in range(n))


def test_criterion_7_complexity_trend():
    sup = statistics.median(voting_steps("super", 0.01))
    base = statistics.median(voting_steps("baseline", 0.01))
    ratios = {meth: statistics.median(voting_steps(meth, 0.05))
              / statistics.median(voting_steps(meth, 0.1)) for meth in METHODS}
    ok = sup < base and all(3 <= r <= 5.5 for r in ratios.values())
    record(7, ok, f"median steps at eps=0.01: super {sup:.0f} vs baseline {base:.0f}; "
           "growth eps 0.1->0.05: " + ", ".join(f"{k} {v:.2f}" for k, v in ratios.items()))


# -- 9 -------------------------------------------------------------------------

def test_criterion_9_chain_correctness():
    models = [IsingModel(2), IsingModel(3), fig3_voting_model(),
              VotingModel(5, 0.4, [0.1, 0.5, 0.2, 0.7, 0.3], [-0.6, -0.1, -0.8, -0.2, -0.4]),
              TableModel([3, 2], [0.0, 0.3, 1.1, 0.7, 2.0, 0.1])]
    worst = 0.0
    for m in models:
        assert m.n_states <= 4096
        for beta in (0.0, 0.05, 1.0):
            P = transition_matrix(m, beta)
            pi = gibbs_distribution(m, beta)
            F = pi[:, None] * P
            worst = max(worst, np.abs(F - F.T).max(), np.abs(pi @ P - pi).max())
    lam_err = 0.0
    for p, q in ((0.1, 0.3), (0.2, 0.05), (0.4, 0.4), (0.25, 0.25)):
        P = np.array([[1 - p, p], [q, 1 - q]])
        lam_err = max(lam_err, abs(matrix_spectral(P).lam - abs(1 - p - q)))
    record(9, worst <= 1e-10 and lam_err <= 1e-12,
           f"max balance/stationarity residual {worst:.1e} on {len(models)} models; "
           f"two-state lambda error {lam_err:.1e}")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(verdict_lines()))
