"""Flat ``key = value`` configuration files and CSV sample serialisation.

Floats are written with ``repr``, the shortest string that round-trips, so a
sample read back is bit-identical to the one written.

Configuration keys (``#`` starts a comment, lists are comma separated)::

    model        cox | diffusion
    theta_true   true parameter; for several Cox marks separate rows with ';'
    ou_speeds    Cox OU mean-reversion speeds, one per covariate
    ou_speed     diffusion OU speed
    ou_vol       OU volatility
    grid_step    Cox simulation grid step
    x0           Cox initial covariate: zero | stationary
    horizon      Cox horizon T (single-shot commands) or diffusion horizon
    n_steps      diffusion number of observation steps (single-shot commands)
    sigma_cap    diffusion volatility cap M0
    size_grid    list of T (cox) or n (diffusion) for Monte Carlo runs
    reps         Monte Carlo replications
    base_seed    64-bit base seed
    g_choice     identity | hessian | moment
    box          lower,upper bounds of the parameter box
    threads      worker processes for Monte Carlo runs
    tuning.NAME  gamma,r,q (one line per named tuning, order preserved)
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .cox import CoxModel, CoxSample, PRESET_SPEEDS
from .cox import PRESET_THETA as COX_THETA
from .diffusion import DiffusionModel, DiffusionSample
from .diffusion import PRESET_THETA as DIFF_THETA
from .errors import DataError, InvalidInputError


def fmt(x: float) -> str:
    return repr(float(x))


def read_config(path) -> dict:
    """Parse a config file into a dict of raw strings (order preserved)."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise InvalidInputError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def floats(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"not a list of numbers: {value!r}") from None


def tunings(cfg: dict) -> dict[str, tuple[float, float, float]]:
    out = {}
    for key, value in cfg.items():
        if key.startswith("tuning."):
            vals = floats(value)
            if len(vals) != 3:
                raise InvalidInputError(f"{key} needs gamma,r,q")
            out[key[len("tuning."):]] = tuple(vals)
    return out


def cox_model_from_config(cfg: dict, horizon: float | None = None) -> CoxModel:
    speeds = floats(cfg["ou_speeds"]) if "ou_speeds" in cfg else list(PRESET_SPEEDS)
    if "theta_true" in cfg:
        theta = [floats(row) for row in cfg["theta_true"].split(";")]
    else:
        theta = [list(COX_THETA)]
    if horizon is None:
        horizon = float(cfg.get("horizon", 200.0))
    return CoxModel(speeds, theta, horizon, float(cfg.get("ou_vol", 0.4)),
                    float(cfg.get("grid_step", 0.01)), cfg.get("x0", "zero"))


def diffusion_model_from_config(cfg: dict, n_steps: int | None = None) -> DiffusionModel:
    theta = floats(cfg["theta_true"]) if "theta_true" in cfg else list(DIFF_THETA)
    if n_steps is None:
        n_steps = int(float(cfg.get("n_steps", 10000)))
    return DiffusionModel(theta, n_steps, float(cfg.get("horizon", 1.0)),
                          float(cfg.get("ou_speed", 0.2)), float(cfg.get("ou_vol", 0.5)),
                          float(cfg.get("sigma_cap", 1e5)))


def write_cox_sample(out_dir, sample: CoxSample) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = np.arange(sample.n_cells + 1) * sample.grid_step
    j = sample.covariate_path.shape[1]
    with open(out / "covariates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(j)])
        for ti, row in zip(t, sample.covariate_path):
            w.writerow([fmt(ti)] + [fmt(v) for v in row])
    with open(out / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mark", "time"])
        for a, times in enumerate(sample.event_times):
            for ti in times:
                w.writerow([a + 1, fmt(ti)])


def read_cox_sample(data_dir, model: CoxModel) -> CoxSample:
    d = Path(data_dir)
    try:
        with open(d / "covariates.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        with open(d / "events.csv", newline="") as fh:
            ev = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read Cox sample in {d}: {exc}") from None
    try:
        header = rows[0]
        if header[0] != "t" or len(header) != model.n_covariates + 1:
            raise DataError("covariates.csv header does not match the model")
        body = np.array([[float(v) for v in r] for r in rows[1:]])
        if ev[0] != ["mark", "time"]:
            raise DataError("events.csv header must be mark,time")
        times = [[] for _ in range(model.n_marks)]
        for r in ev[1:]:
            times[int(r[0]) - 1].append(float(r[1]))
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed Cox sample: {exc}") from None
    if body.shape[0] != model.n_cells + 1:
        raise DataError(f"expected {model.n_cells + 1} grid rows, found {body.shape[0]}")
    step = model.grid_step
    if not np.allclose(body[:, 0], np.arange(body.shape[0]) * step, rtol=0, atol=1e-9):
        raise DataError("covariate grid does not match grid_step")
    times = [np.array(t) for t in times]
    for t in times:
        if t.size and (np.any(np.diff(t) <= 0) or t[0] <= 0 or t[-1] > model.horizon):
            raise DataError("event times must be strictly increasing within (0, T]")
    # contiguous copy so downstream BLAS reductions match an in-memory sample
    return CoxSample(np.ascontiguousarray(body[:, 1:]), times, step)


def write_diffusion_sample(out_dir, sample: DiffusionSample) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = sample.x.shape[1]
    with open(out / "sample.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y"] + [f"x{i + 1}" for i in range(p)])
        for ti, yi, row in zip(sample.times(), sample.y, sample.x):
            w.writerow([fmt(ti), fmt(yi)] + [fmt(v) for v in row])


def read_diffusion_sample(data_dir, model: DiffusionModel) -> DiffusionSample:
    path = Path(data_dir) / "sample.csv"
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read diffusion sample {path}: {exc}") from None
    try:
        if rows[0][:2] != ["t", "y"] or len(rows[0]) != model.p + 2:
            raise DataError("sample.csv header does not match the model")
        body = np.array([[float(v) for v in r] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed diffusion sample: {exc}") from None
    if body.shape[0] < 3:
        raise DataError("diffusion sample needs at least 3 rows")
    if body[0, 1] != 0.0:
        raise DataError("y must start at 0")
    if not np.isclose(body[-1, 0], model.horizon, rtol=1e-12, atol=0):
        raise DataError("last observation time does not match the model horizon")
    return DiffusionSample(np.ascontiguousarray(body[:, 2:]), body[:, 1].copy(),
                           model.horizon)
