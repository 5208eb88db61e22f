"""Command-line entry point: ``tracegibbs {estimate,exact,schedule,sweep,plots}``."""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from .errors import TraceGibbsError
from .models import IsingModel, Model, fig3_voting_model, load_model

SEED_ENV = "TRACEGIBBS_SEED"
ESTIMATE_FIELDS = ["method", "model", "beta_max", "eps", "delta", "seed", "Z_hat",
                   "Q_hat", "steps", "schedule_len", "cap_hit", "wall_ms"]


def resolve_model(spec: str) -> Model:
    """A model file path, or a builtin: ``ising:<side>`` or ``voting:fig3``."""
    if spec.startswith("ising:"):
        return IsingModel(int(spec.split(":", 1)[1]))
    if spec == "voting:fig3":
        return fig3_voting_model()
    return load_model(spec)


def default_seed() -> int:
    v = os.environ.get(SEED_ENV)
    return int(v) if v else 0


def _write_csv(rows, fields, out: str | None):
    if out is None:
        w = csv.DictWriter(sys.stdout, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return
    path = Path(out)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerows(rows)


def cmd_estimate(args) -> int:
    from .pipelines import PipelineConfig, estimate

    model = resolve_model(args.model)
    seed = default_seed() if args.seed is None else args.seed
    cfg = PipelineConfig(model, args.beta_max, args.eps, args.delta,
                         beta_min=args.beta_min, k=args.k, d=args.d, bounds=args.bounds,
                         seed=seed, method=args.method, r=args.ratio,
                         tpa_backend=args.tpa_backend)
    rep = estimate(cfg)
    row = {"method": args.method, "model": args.model, "beta_max": repr(args.beta_max),
           "eps": repr(args.eps), "delta": repr(args.delta), "seed": seed,
           "Z_hat": repr(rep.Z_hat), "Q_hat": repr(rep.Q_hat), "steps": rep.steps,
           "schedule_len": rep.schedule_len, "cap_hit": int(rep.cap_hit),
           "wall_ms": f"{rep.wall_ms:.3f}"}
    _write_csv([row], ESTIMATE_FIELDS, args.out)
    if args.log_dir:
        d = Path(args.log_dir)
        d.mkdir(parents=True, exist_ok=True)
        for i, res in enumerate(rep.details):
            res.write_log(d / f"meanest_{i}.csv")
    return 0


def cmd_exact(args) -> int:
    from .oracle import SPECTRAL_CAP, exact_partition, spectral

    model = resolve_model(args.model)
    s = exact_partition(model, args.beta)
    row = {"beta": repr(s.beta), "Z": repr(s.Z), "z": repr(s.z),
           "n_states": s.n_states, "mean_H": repr(s.mean_H), "var_H": repr(s.var_H),
           "lambda": "", "tau_rx": "", "pi_min": ""}
    if model.n_states <= SPECTRAL_CAP:
        sd = spectral(model, args.beta)
        row.update({"lambda": repr(sd.lam), "tau_rx": repr(sd.tau_rx),
                    "pi_min": repr(sd.pi_min)})
    _write_csv([row], list(row), None)
    if args.histogram:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["energy", "count"])
        for e, c in s.histogram.items():
            w.writerow([repr(e), c])
    return 0


def cmd_schedule(args) -> int:
    from .models import shifted_hamiltonian
    from .pipelines import interval_bounds, parse_bounds
    from .tpa import ExactTPASampler, GibbsTPASampler, tpa_schedule
    from .chains import make_rng

    model = resolve_model(args.model)
    sh = shifted_hamiltonian(model)
    seed = default_seed() if args.seed is None else args.seed
    rng = make_rng(seed)
    if args.tpa_backend == "exact":
        sampler = ExactTPASampler(sh, rng)
    else:
        b = parse_bounds(args.bounds, model)
        sampler = GibbsTPASampler(model, interval_bounds(b, args.beta_min, args.beta_max),
                                  rng, h_shift=sh.raw_min)
    s = tpa_schedule(sh, args.beta_min, args.beta_max, args.k, args.d, sampler)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["i", "beta"])
    for i, b in enumerate(s.betas):
        w.writerow([i, repr(b)])
    print(f"# ell={s.ell} k={s.k} d={s.d} hits={s.hits} steps={s.steps}",
          file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    from .sweep import ExperimentSpec, emit_plots, run_sweep

    spec = ExperimentSpec.load(args.config)
    if args.workers is not None:
        spec.workers = args.workers
    if args.out_dir is not None:
        spec.out_dir = Path(args.out_dir)
    res = run_sweep(spec, Path(args.config).parent)
    emit_plots(res)
    print(f"{len(res.rows)} rows, {res.failures} failed -> {res.results_csv}",
          file=sys.stderr)
    return 2 if res.failures else 0


def cmd_plots(args) -> int:
    from .sweep import emit_plots

    methods = args.methods.split(",") if args.methods is not None else None
    methods = [m for m in methods if m] if methods is not None else None
    for p in emit_plots(args.csv, methods, args.out_dir):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracegibbs",
                                description="Gibbs partition function estimation")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, beta_flag="--beta-max"):
        sp.add_argument("--model", required=True,
                        help="model JSON file, ising:<side> or voting:fig3")
        sp.add_argument(beta_flag, type=float, required=True, dest="beta_max")
        sp.add_argument("--beta-min", type=float, default=0.0)
        sp.add_argument("--seed", type=int, default=None,
                        help=f"RNG root seed (default ${SEED_ENV} or 0)")
        sp.add_argument("--k", type=int, default=None)
        sp.add_argument("--d", type=int, default=64)
        sp.add_argument("--bounds", default="oracle",
                        help="oracle or manual:<Lambda,T,pi_min>")
        sp.add_argument("--tpa-backend", choices=("gibbs", "exact"), default="gibbs")

    e = sub.add_parser("estimate", help="estimate Z(beta_max)")
    common(e)
    e.add_argument("--method", choices=("super", "parallel", "baseline"), default="super")
    e.add_argument("--eps", type=float, default=0.1)
    e.add_argument("--delta", type=float, default=0.1)
    e.add_argument("--ratio", type=float, default=1.1)
    e.add_argument("--out", default=None, help="append the result row to this CSV")
    e.add_argument("--log-dir", default=None, help="write RelMeanEst iteration logs here")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("exact", help="exact Z by enumeration")
    x.add_argument("--model", required=True)
    x.add_argument("--beta", type=float, required=True)
    x.add_argument("--histogram", action="store_true", help="also print the energy histogram")
    x.set_defaults(func=cmd_exact)

    s = sub.add_parser("schedule", help="print a TPA(k,d) cooling schedule")
    common(s)
    s.set_defaults(func=cmd_schedule)

    w = sub.add_parser("sweep", help="run an experiment sweep from a JSON config")
    w.add_argument("--config", required=True)
    w.add_argument("--workers", type=int, default=None)
    w.add_argument("--out-dir", default=None)
    w.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plots", help="write plot scripts for a results CSV")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out-dir", default=None)
    pl.add_argument("--methods", default=None, help="comma-separated method subset")
    pl.set_defaults(func=cmd_plots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TraceGibbsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
