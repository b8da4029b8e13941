"""Monte Carlo harness: simulate, estimate, select, refit, aggregate.

Within a replication every tuning sees the same dataset and the same
initial estimate, so comparators differ only through their penalty.
Replication ``i`` at size index ``k`` draws from the streams
``SeedDerivation(base_seed).rng(i, tag, k)``; results therefore do not
depend on how replications are scheduled across workers.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cox, diffusion
from .errors import InvalidInputError, NumericalError
from .io import fmt
from .penalty import TuningConfig, compute_weights
from .po import po_estimate
from .seeding import SeedDerivation
from .solver import LsaProblem, consistency_bound, solve

log = logging.getLogger(__name__)

MAX_FAIL_FRACTION = 0.05
BOUND_SLACK = 1e-9

COX_TUNINGS = {"p-LSA": (1.0, 1.2, 0.3), "unified-LASSO": (1.0, 1.2, 1.0),
               "bridge": (0.0, 1.0, 0.3)}
DIFFUSION_TUNINGS = {"p-LSA": (3.2, 1.2, 0.3), "unified-LASSO": (3.2, 1.2, 1.0),
                     "bridge": (0.0, 1.0, 0.3)}


@dataclass
class McConfig:
    model: str  # "cox" or "diffusion"
    size_grid: list
    tunings: dict  # name -> (gamma, r, q)
    reps: int = 200
    base_seed: int = 0
    g_choice: str = "identity"
    box: tuple = (-10.0, 10.0)
    model_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in ("cox", "diffusion"):
            raise InvalidInputError(f"unknown model {self.model!r}")
        if self.reps < 1:
            raise InvalidInputError("reps must be >= 1")
        if not self.tunings:
            raise InvalidInputError("at least one tuning is required")
        if self.g_choice not in ("identity", "hessian", "moment"):
            raise InvalidInputError(f"unknown g_choice {self.g_choice!r}")
        if self.model == "diffusion" and self.g_choice == "moment":
            raise InvalidInputError("g_choice 'moment' is defined for the Cox model only")
        for name, (gamma, r, q) in self.tunings.items():
            cfg = TuningConfig(gamma, r, q, rate=0.5)
            if gamma != 0.0 and not cfg.in_selection_window():
                warnings.warn(f"tuning {name}: r={r} outside (1, 2 - q + gamma)")

    def build_model(self, size):
        if self.model == "cox":
            base = cox.preset_cox_model(float(size))
            prm = {"ou_speeds": base.ou_speeds, "theta_true": base.theta_true,
                   "ou_vol": base.ou_vol, "grid_step": base.grid_step, "x0": base.x0}
            prm.update(self.model_params)
            return cox.CoxModel(horizon=float(size), **prm)
        base = diffusion.preset_diffusion_model(int(size))
        prm = {"theta_true": base.theta_true, "horizon": base.horizon,
               "ou_speed": base.ou_speed, "ou_vol": base.ou_vol,
               "sigma_cap": base.sigma_cap}
        prm.update(self.model_params)
        return diffusion.DiffusionModel(n_steps=int(size), **prm)


@dataclass
class EstimateRecord:
    rep: int
    size: float
    tuning: str
    theta_tilde: np.ndarray
    theta_hat: np.ndarray
    theta_check: np.ndarray
    active: np.ndarray
    bound_lhs: float
    bound_rhs: float
    po_converged: bool

    @property
    def bound_ok(self) -> bool:
        return self.bound_lhs <= self.bound_rhs * (1.0 + BOUND_SLACK) + BOUND_SLACK


@dataclass
class CellSummary:
    """Aggregates for one (tuning, size) cell."""

    tuning: str
    size: float
    n_ok: int
    n_failed: int
    selection_pct: float
    mean: dict  # estimator -> per-coordinate mean
    sd: dict
    zero_pct: np.ndarray
    correct_pct: np.ndarray
    bound_violations: int
    po_failures: int
    sd_degenerate: bool


@dataclass
class McSummary:
    config: McConfig
    theta_true: np.ndarray
    cells: list
    records: list = field(repr=False, default_factory=list)
    failures: list = field(default_factory=list)  # (size, rep, message)

    def cell(self, tuning: str, size) -> CellSummary:
        for c in self.cells:
            if c.tuning == tuning and c.size == size:
                return c
        raise KeyError((tuning, size))


def _g_matrix(choice, mc_model, lik, sample, theta_tilde):
    if choice == "identity":
        return np.eye(theta_tilde.size)
    if isinstance(mc_model, cox.CoxModel):
        if choice == "hessian":
            return cox.g_hat_hessian(sample, theta_tilde)
        return cox.g_hat_moment(sample, theta_tilde)
    return diffusion.g_hat_n(mc_model, sample, theta_tilde)


def run_replication(cfg: McConfig, size_index: int, rep: int):
    """One replication at one size; returns a list of records or an error string."""
    size = cfg.size_grid[size_index]
    model = cfg.build_model(size)
    sd = SeedDerivation(cfg.base_seed)
    try:
        if isinstance(model, cox.CoxModel):
            sample = cox.simulate(model, sd, rep, extra=(size_index,))
            lik = cox.CoxQuasiLikelihood(sample)
            theta_tilde = cox.qmle(sample, box=cfg.box, lik=lik)
            theta_star = model.theta_true.ravel()
        else:
            sample = diffusion.simulate(model, sd, rep, extra=(size_index,))
            lik = diffusion.DiffusionQuasiLikelihood(sample, model.sigma_cap)
            theta_tilde = diffusion.qmle(model, sample, box=cfg.box, lik=lik)
            theta_star = model.theta_true
        rate = model.rate()
        g_hat = _g_matrix(cfg.g_choice, model, lik, sample, theta_tilde)
        out = []
        for name, (gamma, r, q) in cfg.tunings.items():
            tc = TuningConfig(gamma, r, q, rate)
            weights = compute_weights(theta_tilde, tc)
            prob = LsaProblem(theta_tilde, g_hat, weights, q, cfg.box[0], cfg.box[1])
            sol = solve(prob)
            po = po_estimate(theta_tilde, tc, lik, cfg.box)
            lhs = float(np.linalg.norm((sol.theta_hat - theta_star) / rate))
            rhs = consistency_bound(g_hat, theta_tilde, theta_star, weights.kappa, q, rate)
            out.append(EstimateRecord(rep, size, name, theta_tilde, sol.theta_hat,
                                      po.theta_check, sol.active, lhs, rhs,
                                      po.refit_converged))
        return out
    except NumericalError as exc:
        return f"{type(exc).__name__}: {exc}"


def _run_task(args):
    cfg, k, rep = args
    return k, rep, run_replication(cfg, k, rep)


def _sd(x):
    if x.shape[0] < 2:
        return np.zeros(x.shape[1])
    return x.std(axis=0, ddof=1)


def aggregate(cfg: McConfig, theta_true, records, failures) -> list:
    truth_active = np.asarray(theta_true) != 0.0
    cells = []
    for size in cfg.size_grid:
        n_failed = sum(1 for f in failures if f[0] == size)
        for name in cfg.tunings:
            recs = [r for r in records if r.size == size and r.tuning == name]
            n = len(recs)
            if n == 0:
                p = truth_active.size
                nan = np.full(p, np.nan)
                cells.append(CellSummary(name, size, 0, n_failed, math.nan,
                                         {k: nan for k in ("initial", "plsa", "po")},
                                         {k: nan for k in ("initial", "plsa", "po")},
                                         nan, nan, 0, 0, True))
                continue
            est = {"initial": np.array([r.theta_tilde for r in recs]),
                   "plsa": np.array([r.theta_hat for r in recs]),
                   "po": np.array([r.theta_check for r in recs])}
            active = np.array([r.active for r in recs])
            exact = np.all(active == truth_active, axis=1)
            cells.append(CellSummary(
                tuning=name, size=size, n_ok=n, n_failed=n_failed,
                selection_pct=100.0 * exact.sum() / n,
                mean={k: v.mean(axis=0) for k, v in est.items()},
                sd={k: _sd(v) for k, v in est.items()},
                zero_pct=100.0 * (~active).sum(axis=0) / n,
                correct_pct=100.0 * (active == truth_active).sum(axis=0) / n,
                bound_violations=sum(not r.bound_ok for r in recs),
                po_failures=sum(not r.po_converged for r in recs),
                sd_degenerate=n < 2))
    return cells


def run_mc(cfg: McConfig, threads: int = 1) -> McSummary:
    tasks = [(cfg, k, rep) for k in range(len(cfg.size_grid)) for rep in range(cfg.reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    else:
        results = [_run_task(t) for t in tasks]
    records, failures = [], []
    for k, rep, res in results:
        size = cfg.size_grid[k]
        if isinstance(res, str):
            failures.append((size, rep, res))
            log.warning("replication %d at size %s failed: %s", rep, size, res)
        else:
            records.extend(res)
    for size in cfg.size_grid:
        n_fail = sum(1 for f in failures if f[0] == size)
        if n_fail > MAX_FAIL_FRACTION * cfg.reps:
            raise NumericalError(f"{n_fail} of {cfg.reps} replications failed at size {size}")
    probe = cfg.size_grid[0] if cfg.size_grid else (200.0 if cfg.model == "cox" else 10000)
    theta_true = np.asarray(cfg.build_model(probe).theta_true).ravel()
    cells = aggregate(cfg, theta_true, records, failures)
    return McSummary(cfg, theta_true, cells, records, failures)


# ---------------------------------------------------------------- output

def _size_label(cfg, size):
    sym = "T" if cfg.model == "cox" else "n"
    return f"{sym}={size:g}"


def render_selection_table(summary: McSummary) -> str:
    cfg = summary.config
    head = ["", "(gamma, r, q)"] + [_size_label(cfg, s) for s in cfg.size_grid]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    if not cfg.size_grid:
        return "\n".join(lines)
    for name, (g, r, q) in cfg.tunings.items():
        row = [f"%({name})", f"({g:g}, {r:g}, {q:g})"]
        row += [f"{summary.cell(name, s).selection_pct:.1f}" for s in cfg.size_grid]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_estimate_table(summary: McSummary, size, tuning: str | None = None) -> str:
    cfg = summary.config
    tuning = tuning or next(iter(cfg.tunings))
    c = summary.cell(tuning, size)
    p = summary.theta_true.size
    head = [""] + [f"theta{j + 1}" for j in range(p)]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    lines.append("| true | " + " | ".join(f"{v:g}" for v in summary.theta_true) + " |")
    for key, label in (("initial", "initial"), ("plsa", tuning), ("po", "P-O")):
        lines.append(f"| {label} | " + " | ".join(f"{v:.4f}" for v in c.mean[key]) + " |")
        lines.append("| | " + " | ".join(f"({v:.4f})" for v in c.sd[key]) + " |")
    lines.append(f"| %({tuning}) | " + " | ".join(f"{v:.1f}" for v in c.correct_pct) + " |")
    return "\n".join(lines)


def render_tables(summary: McSummary) -> str:
    cfg = summary.config
    parts = ["## Variable selection (% of replications choosing the true model)", ""]
    parts.append(render_selection_table(summary))
    for size in cfg.size_grid:
        c = summary.cell(next(iter(cfg.tunings)), size)
        parts += ["", f"## Estimates at {_size_label(cfg, size)} "
                      f"(mean, SD in parentheses; {c.n_ok} replications)", ""]
        parts.append(render_estimate_table(summary, size))
    if summary.failures:
        parts += ["", f"Failed replications: {len(summary.failures)}"]
    if any(c.sd_degenerate for c in summary.cells):
        parts += ["", "Note: fewer than 2 replications in some cells; SD reported as 0."]
    return "\n".join(parts) + "\n"


SUMMARY_FIELDS = ["tuning", "gamma", "r", "q", "size", "coordinate", "true",
                  "initial_mean", "initial_sd", "plsa_mean", "plsa_sd", "po_mean", "po_sd",
                  "zero_pct", "correct_pct", "selection_pct", "n_ok", "n_failed",
                  "bound_violations", "po_failures", "sd_degenerate"]


def write_summary_csv(summary: McSummary, path) -> None:
    cfg = summary.config
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for c in summary.cells:
            g, r, q = cfg.tunings[c.tuning]
            for j, true in enumerate(summary.theta_true):
                w.writerow([c.tuning, fmt(g), fmt(r), fmt(q), fmt(c.size), j + 1, fmt(true),
                            fmt(c.mean["initial"][j]), fmt(c.sd["initial"][j]),
                            fmt(c.mean["plsa"][j]), fmt(c.sd["plsa"][j]),
                            fmt(c.mean["po"][j]), fmt(c.sd["po"][j]),
                            fmt(c.zero_pct[j]), fmt(c.correct_pct[j]), fmt(c.selection_pct),
                            c.n_ok, c.n_failed, c.bound_violations, c.po_failures,
                            int(c.sd_degenerate)])


def write_records_csv(summary: McSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "size", "tuning", "coordinate", "true", "initial", "plsa",
                    "po", "plsa_active", "bound_ok"])
        for r in summary.records:
            for j, true in enumerate(summary.theta_true):
                w.writerow([r.rep, fmt(r.size), r.tuning, j + 1, fmt(true),
                            fmt(r.theta_tilde[j]), fmt(r.theta_hat[j]), fmt(r.theta_check[j]),
                            int(r.active[j]), int(r.bound_ok)])


def write_outputs(summary: McSummary, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(summary, out / "summary.csv")
    write_records_csv(summary, out / "records.csv")
    (out / "tables.md").write_text(render_tables(summary))
    if summary.failures:
        with open(out / "failures.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["size", "rep", "message"])
            for size, rep, msg in summary.failures:
                w.writerow([fmt(size), rep, msg])


# ---------------------------------------------------------------- presets

def preset_config(table: str, reps: int = 200, base_seed: int = 0) -> McConfig:
    """Settings of the four published tables."""
    if table == "table1":
        return McConfig("cox", [50, 100, 200, 400], dict(COX_TUNINGS), reps, base_seed)
    if table == "table2":
        return McConfig("cox", [200], {"p-LSA": COX_TUNINGS["p-LSA"]}, reps, base_seed)
    if table == "table3":
        return McConfig("diffusion", [2500, 5000, 10000, 20000], dict(DIFFUSION_TUNINGS),
                        reps, base_seed)
    if table == "table4":
        return McConfig("diffusion", [10000], {"p-LSA": DIFFUSION_TUNINGS["p-LSA"]},
                        reps, base_seed)
    raise InvalidInputError(f"unknown table {table!r}")
