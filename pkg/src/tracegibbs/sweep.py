"""Parameter sweeps over models, methods and precisions, with plot scripts.

Results are appended to ``results.csv`` one row per (model, method, eps, rep)
cell in a fixed order.  A rerun skips cells already present, so an
interrupted sweep resumes to a byte-identical file.  Wall-clock times go to a
separate ``timings.csv`` because they are not reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParameterError, TraceGibbsError
from .models import Model, load_model, model_from_dict

RESULT_FIELDS = ["model", "method", "eps", "rep", "seed", "beta_max", "delta",
                 "Z_hat", "log_Z_hat", "Q_hat", "steps", "tpa_steps", "schedule_len",
                 "cap_hit", "eps_cert", "Z_oracle", "rel_error", "covered", "error"]
SUMMARY_FIELDS = ["model", "method", "eps", "n", "median_steps", "err_q50", "err_q90",
                  "coverage"]


@dataclass
class ModelEntry:
    name: str
    beta_max: float
    file: str | None = None
    inline: dict | None = None

    def load(self, base: Path) -> Model:
        if self.inline is not None:
            return model_from_dict(self.inline)
        return load_model(resolve_path(self.file, base))


def resolve_path(p: str, base: Path) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


@dataclass
class ExperimentSpec:
    models: list[ModelEntry]
    methods: list[str]
    eps: list[float]
    reps: list[int]
    out_dir: Path
    delta: float = 0.1
    root_seed: int = 0
    k: int | None = None
    d: int = 64
    bounds: str = "oracle"
    workers: int = 1

    def __post_init__(self):
        if not (self.models and self.eps and self.reps):
            raise ParameterError("models, eps and reps must be nonempty")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ParameterError("model names must be unique")

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentSpec":
        base = Path(".") if base is None else base
        models = []
        for m in d["models"]:
            name = m.get("name") or (Path(m["file"]).stem if "file" in m else None)
            if name is None:
                raise ParameterError("inline models need a name")
            models.append(ModelEntry(name, float(m["beta_max"]), m.get("file"),
                                     m.get("model")))
        reps = d.get("seeds") or list(range(int(d.get("repetitions", 1))))
        return cls(models, list(d.get("methods", ["super", "parallel", "baseline"])),
                   [float(e) for e in d["eps"]], [int(r) for r in reps],
                   resolve_path(d.get("out_dir", "sweep_out"), base),
                   float(d.get("delta", 0.1)), int(d.get("root_seed", 0)), d.get("k"),
                   int(d.get("d", 64)), d.get("bounds", "oracle"),
                   int(d.get("workers", 1)))

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)

    def cells(self) -> list[tuple[ModelEntry, str, float, int]]:
        return [(m, meth, e, r) for m in self.models for meth in self.methods
                for e in self.eps for r in self.reps]


@dataclass
class SweepResult:
    rows: list[dict]
    summary: list[dict]
    out_dir: Path
    methods: list[str] = field(default_factory=list)
    failures: int = 0

    @property
    def results_csv(self) -> Path:
        return self.out_dir / "results.csv"


def cell_seed(root: int, model: str, method: str, eps: float, rep: int) -> int:
    """Deterministic per-cell seed, independent of execution order."""
    key = f"{root}|{model}|{method}|{eps!r}|{rep}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def _key(row) -> tuple:
    return (row["model"], row["method"], repr(float(row["eps"])), int(row["rep"]))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _oracle_log_z(model: Model, beta: float) -> float | None:
    from .oracle import log_partition
    from .errors import OracleUnavailableError

    try:
        return log_partition(model, beta)
    except OracleUnavailableError:
        return None


def _run_cell(args):
    entry, method, eps, rep, spec_fields, base = args
    from .pipelines import PipelineConfig, estimate

    delta, root, k, d, bounds = spec_fields
    seed = cell_seed(root, entry.name, method, eps, rep)
    row = {f: "" for f in RESULT_FIELDS}
    row.update(model=entry.name, method=method, eps=eps, rep=rep, seed=seed,
               beta_max=entry.beta_max, delta=delta)
    wall = 0.0
    try:
        model = entry.load(base)
        rep_ = estimate(PipelineConfig(model, entry.beta_max, eps, delta, k=k, d=d,
                                       bounds=bounds, seed=seed, method=method))
        lz = _oracle_log_z(model, entry.beta_max)
        row.update(Z_hat=rep_.Z_hat, log_Z_hat=rep_.log_Z_hat, Q_hat=rep_.Q_hat,
                   steps=rep_.steps, tpa_steps=rep_.tpa_steps,
                   schedule_len=rep_.schedule_len, cap_hit=rep_.cap_hit,
                   eps_cert=rep_.eps_cert)
        if lz is not None:
            err = abs(math.expm1(rep_.log_Z_hat - lz))
            row.update(Z_oracle=math.exp(lz), rel_error=err, covered=err <= eps)
        wall = rep_.wall_ms
    except (TraceGibbsError, OSError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return {k_: _fmt(v) for k_, v in row.items()}, wall


def _read_rows(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        if r["error"]:
            continue
        groups.setdefault((r["model"], r["method"], r["eps"]), []).append(r)
    out = []
    for (model, method, eps), rs in groups.items():
        steps = [int(r["steps"]) for r in rs]
        errs = sorted(float(r["rel_error"]) for r in rs if r["rel_error"])
        cov = [r["covered"] == "1" for r in rs if r["covered"]]
        out.append({
            "model": model, "method": method, "eps": eps, "n": len(rs),
            "median_steps": statistics.median(steps),
            "err_q50": _quantile(errs, 0.5), "err_q90": _quantile(errs, 0.9),
            "coverage": sum(cov) / len(cov) if cov else "",
        })
    return out


def _quantile(xs, q):
    if not xs:
        return ""
    return statistics.quantiles(xs, n=100, method="inclusive")[int(q * 100) - 1] \
        if len(xs) > 1 else xs[0]


def run_sweep(spec: ExperimentSpec, base: Path | None = None, limit: int | None = None
              ) -> SweepResult:
    """Execute every cell not already in ``results.csv``.

    ``limit`` caps the number of new cells (used to simulate interruption).
    """
    base = Path(".") if base is None else base
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res_path, time_path = out / "results.csv", out / "timings.csv"
    done = {_key(r) for r in _read_rows(res_path)}
    todo = [c for c in spec.cells()
            if (c[0].name, c[1], repr(float(c[2])), c[3]) not in done]
    if limit is not None:
        todo = todo[:limit]
    fields_ = (spec.delta, spec.root_seed, spec.k, spec.d, spec.bounds)
    jobs = [(m, meth, e, r, fields_, base) for m, meth, e, r in todo]
    new_res = not res_path.exists()
    new_time = not time_path.exists()
    with res_path.open("a", newline="", encoding="utf-8") as fr, \
            time_path.open("a", newline="", encoding="utf-8") as ft:
        wr = csv.DictWriter(fr, fieldnames=RESULT_FIELDS, lineterminator="\n")
        wt = csv.writer(ft, lineterminator="\n")
        if new_res:
            wr.writeheader()
        if new_time:
            wt.writerow(["model", "method", "eps", "rep", "wall_ms"])
        if spec.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(spec.workers) as ex:
                results = ex.map(_run_cell, jobs)
                _drain(results, wr, wt, fr, ft)
        else:
            _drain(map(_run_cell, jobs), wr, wt, fr, ft)
    rows = _read_rows(res_path)
    summary = summarize(rows)
    with (out / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows({k: _fmt(v) for k, v in s.items()} for s in summary)
    failures = sum(1 for r in rows if r["error"])
    return SweepResult(rows, summary, out, list(spec.methods), failures)


def _drain(results, wr, wt, fr, ft):
    # single writer, in cell order; flushed per row so a crash loses at most one
    for row, wall in results:
        wr.writerow(row)
        wt.writerow([row["model"], row["method"], row["eps"], row["rep"], repr(wall)])
        fr.flush()
        ft.flush()
        os.fsync(fr.fileno())


# -- plot scripts ---------------------------------------------------------------

_PLOT_HEADER = '''"""Generated plot script; reads the sweep CSV next to it."""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "tracegibbs"
HERE = Path(__file__).resolve().parent
CSV = Path(sys.argv[1]) if len(sys.argv) > 1 else HERE / {csv_name!r}
METHODS = {methods!r}


def load():
    with open(CSV, newline="", encoding="utf-8") as fh:
        return [r for r in csv.DictReader(fh) if not r["error"]]


def median(xs):
    xs = sorted(xs)
    n = len(xs)
    return (xs[n // 2] + xs[(n - 1) // 2]) / 2.0


def save(fig, name):
    fig.savefig(HERE / name, format="svg", metadata={{"Date": None}})
'''

_STEPS_VS_EPS = '''
rows = load()
fig, ax = plt.subplots(figsize=(5, 4))
for method in METHODS:
    by_eps = defaultdict(list)
    for r in rows:
        if r["method"] == method:
            by_eps[float(r["eps"])].append(int(r["steps"]))
    xs = sorted(by_eps, reverse=True)
    ax.plot([1.0 / e for e in xs], [median(by_eps[e]) for e in xs], marker="o",
            label=method)
ax.set_xlabel("1/eps")
ax.set_ylabel("median Markov chain steps")
ax.set_yscale("log")
ax.legend()
save(fig, "steps_vs_eps.svg")
'''

_ERROR_VS_EPS = '''
rows = [r for r in load() if r["rel_error"]]
fig, ax = plt.subplots(figsize=(5, 4))
eps_all = sorted({float(r["eps"]) for r in rows})
for method in METHODS:
    by_eps = defaultdict(list)
    for r in rows:
        if r["method"] == method:
            by_eps[float(r["eps"])].append(float(r["rel_error"]))
    xs = sorted(by_eps)
    ax.plot(xs, [median(by_eps[e]) for e in xs], marker="o", label=method)
ax.plot(eps_all, eps_all, linestyle="--", color="black", label="requested eps")
ax.set_xlabel("eps")
ax.set_ylabel("median relative error")
ax.legend()
save(fig, "error_vs_eps.svg")
'''

_STEPS_VS_Z = '''
rows = [r for r in load() if r["Z_oracle"]]
fig, ax = plt.subplots(figsize=(5, 4))
for method in METHODS:
    pts = [(float(r["Z_oracle"]), int(r["steps"])) for r in rows if r["method"] == method]
    ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=12, label=method)
ax.set_xlabel("Z (oracle)")
ax.set_ylabel("Markov chain steps")
ax.set_xscale("log")
ax.set_yscale("log")
ax.legend()
save(fig, "steps_vs_Z.svg")
'''

PLOT_SCRIPTS = {"plot_steps_vs_eps.py": _STEPS_VS_EPS,
                "plot_error_vs_eps.py": _ERROR_VS_EPS,
                "plot_steps_vs_Z.py": _STEPS_VS_Z}


def emit_plots(result: SweepResult | str | os.PathLike, methods=None,
               out_dir=None) -> list[Path]:
    """Write the plot scripts beside the results CSV; returns their paths."""
    if isinstance(result, SweepResult):
        csv_path = result.results_csv
        methods = result.methods if methods is None else methods
    else:
        csv_path = Path(result)
        if methods is None:
            seen = []
            for r in _read_rows(csv_path):
                if r["method"] not in seen:
                    seen.append(r["method"])
            methods = seen
    out = Path(out_dir) if out_dir is not None else csv_path.parent
    out.mkdir(parents=True, exist_ok=True)
    rel = os.path.relpath(csv_path, out)
    header = _PLOT_HEADER.format(csv_name=rel, methods=list(methods))
    paths = []
    for name, body in PLOT_SCRIPTS.items():
        p = out / name
        p.write_text(header + body, encoding="utf-8")
        paths.append(p)
    return paths
