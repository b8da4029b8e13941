"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Failures print one JSON line ``{"error": ..., "exit_code": ..., "message": ...}``
on standard error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import cox, diffusion, io, montecarlo
from .errors import DataError, InvalidInputError, NumericalError
from .penalty import TuningConfig, compute_weights
from .po import po_estimate
from .solver import LsaProblem, solve

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config(path) -> dict:
    return io.read_config(path) if path else {}


def _box(cfg: dict):
    vals = io.floats(cfg.get("box", "-10,10"))
    if len(vals) != 2:
        raise InvalidInputError("box needs lower,upper")
    return vals[0], vals[1]


def cmd_simulate(args) -> None:
    cfg = _config(args.config)
    if args.model == "cox":
        model = io.cox_model_from_config(cfg)
        io.write_cox_sample(args.out, cox.simulate(model, args.seed))
    else:
        model = io.diffusion_model_from_config(cfg)
        io.write_diffusion_sample(args.out, diffusion.simulate(model, args.seed))


def cmd_fit(args) -> None:
    cfg = _config(args.config)
    kind = cfg.get("model", "cox")
    box = _box(cfg)
    if kind == "cox":
        model = io.cox_model_from_config(cfg)
        sample = io.read_cox_sample(args.data, model)
        lik = cox.CoxQuasiLikelihood(sample)
        theta_tilde = cox.qmle(sample, box=box, lik=lik)
        rate = model.rate()
    elif kind == "diffusion":
        model = io.diffusion_model_from_config(cfg)
        sample = io.read_diffusion_sample(args.data, model)
        model = model.with_steps(sample.n_steps)
        lik = diffusion.DiffusionQuasiLikelihood(sample, model.sigma_cap)
        theta_tilde = diffusion.qmle(model, sample, box=box, lik=lik)
        rate = model.rate()
    else:
        raise InvalidInputError(f"unknown model {kind!r}")

    if args.method == "qmle":
        est = theta_tilde
    else:
        if None in (args.gamma, args.r, args.q):
            raise UsageError("--gamma, --r and --q are required for plsa and po")
        tc = TuningConfig(args.gamma, args.r, args.q, rate)
        if args.method == "po":
            est = po_estimate(theta_tilde, tc, lik, box).theta_check
        else:
            if args.gmat == "identity":
                g = np.eye(theta_tilde.size)
            elif kind == "cox":
                g = (cox.g_hat_hessian if args.gmat == "hessian" else cox.g_hat_moment)(
                    sample, theta_tilde)
            elif args.gmat == "hessian":
                g = diffusion.g_hat_n(model, sample, theta_tilde)
            else:
                raise InvalidInputError("--gmat moment is defined for the Cox model only")
            prob = LsaProblem(theta_tilde, g, compute_weights(theta_tilde, tc), tc.q,
                              box[0], box[1])
            est = solve(prob).theta_hat
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["coordinate", "estimate", "active"])
        for j, v in enumerate(est):
            w.writerow([j + 1, io.fmt(v), int(v != 0.0)])


def mc_config_from_file(cfg: dict, reps=None, seed=None) -> montecarlo.McConfig:
    kind = cfg.get("model", "cox")
    if kind not in ("cox", "diffusion"):
        raise InvalidInputError(f"unknown model {kind!r}")
    tun = io.tunings(cfg) or dict(montecarlo.COX_TUNINGS if kind == "cox"
                                  else montecarlo.DIFFUSION_TUNINGS)
    if "size_grid" in cfg:
        sizes = io.floats(cfg["size_grid"])
    else:
        sizes = [200.0] if kind == "cox" else [10000.0]
    if kind == "diffusion":
        sizes = [int(s) for s in sizes]
    params = {}
    if kind == "cox":
        m = io.cox_model_from_config(cfg, horizon=float(sizes[0]))
        params = {"ou_speeds": m.ou_speeds, "theta_true": m.theta_true, "ou_vol": m.ou_vol,
                  "grid_step": m.grid_step, "x0": m.x0}
    else:
        m = io.diffusion_model_from_config(cfg, n_steps=sizes[0])
        params = {"theta_true": m.theta_true, "horizon": m.horizon,
                  "ou_speed": m.ou_speed, "ou_vol": m.ou_vol, "sigma_cap": m.sigma_cap}
    return montecarlo.McConfig(
        kind, sizes, tun,
        reps=int(reps if reps is not None else cfg.get("reps", 200)),
        base_seed=int(seed if seed is not None else cfg.get("base_seed", 0)),
        g_choice=cfg.get("g_choice", "identity"), box=_box(cfg), model_params=params)


def cmd_mc(args) -> None:
    cfg = _config(args.config)
    mc_cfg = mc_config_from_file(cfg, args.reps, args.seed)
    threads = args.threads if args.threads is not None else int(cfg.get("threads", 1))
    summary = montecarlo.run_mc(mc_cfg, threads=threads)
    montecarlo.write_outputs(summary, args.out)
    print(montecarlo.render_selection_table(summary))


def cmd_reproduce(args) -> None:
    mc_cfg = montecarlo.preset_config(args.table, args.reps, args.seed)
    summary = montecarlo.run_mc(mc_cfg, threads=args.threads or 1)
    montecarlo.write_outputs(summary, args.out)
    if args.table in ("table1", "table3"):
        print(montecarlo.render_selection_table(summary))
    else:
        print(montecarlo.render_estimate_table(summary, mc_cfg.size_grid[0]))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="plsa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate one dataset and write CSV files")
    s.add_argument("model", choices=["cox", "diffusion"])
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="estimate from a simulated dataset")
    f.add_argument("--config")
    f.add_argument("--data", required=True)
    f.add_argument("--method", choices=["plsa", "po", "qmle"], required=True)
    f.add_argument("--gamma", type=float)
    f.add_argument("--r", type=float)
    f.add_argument("--q", type=float)
    f.add_argument("--gmat", choices=["identity", "hessian", "moment"], default="identity")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("mc", help="run a Monte Carlo experiment from a config file")
    m.add_argument("--config", required=True)
    m.add_argument("--reps", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--threads", type=int)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_mc)

    r = sub.add_parser("reproduce", help="run the published table settings")
    r.add_argument("table", choices=["table1", "table2", "table3", "table4"])
    r.add_argument("--reps", type=int, default=200)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reproduce)
    return p


def _fail(kind: str, code: int, message: str) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, InvalidInputError) as exc:
        return _fail("usage", EXIT_USAGE, str(exc))
    except DataError as exc:
        return _fail("data", EXIT_DATA, str(exc))
    except NumericalError as exc:
        return _fail("numerical", EXIT_NUMERICAL, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
