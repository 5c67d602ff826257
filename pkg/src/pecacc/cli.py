"""Command-line front end.

Subcommands ``synth``, ``certify``, ``simulate``, ``case-study`` and
``sweep``. Reports go to files under ``--out``; logs go to stderr.

Exit codes: 0 success, 1 infeasible synthesis or failed certificate,
2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .closedloop import ClosedLoopError, Realization
from .model import kmh
from .config import Config, ConfigError, dumps, load_config
from .sdp import INFEASIBLE, OPTIMAL
from .sim import SimulationError, case_study, delay_study, nominal_trajectory, rmse, simulate, write_csv
from .svg import line_chart
from .synthesis import SolverFailure, SynthesisError, certify, grid_search, realization_table, vr_sweep

log = logging.getLogger("pecacc")

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _g9(x):
    return f"{x:.9g}"


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_g9(v) if isinstance(v, float) else v for v in r])
    log.info("wrote %s", path)


def _prepare(args) -> Config:
    cfg = load_config(args.config)
    over = {}
    if args.objective is not None:
        over["objective"] = args.objective
    if args.out is not None:
        over["output_dir"] = args.out
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    cfg = cfg.with_overrides(**over)
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_text(os.path.join(cfg.output_dir, "effective_config.json"), dumps(cfg.to_dict()))
    return cfg


def _path(cfg, name):
    return os.path.join(cfg.output_dir, name)


def cmd_synth(cfg: Config, args):
    v = cfg.synth_v_r_kmh if args.vr is None else args.vr
    setup = cfg.setup(v)
    objective = cfg.objective_spec()
    try:
        rep = grid_search(objective, cfg.grid, setup, workers=cfg.workers)
    except SynthesisError as exc:
        _write_text(_path(cfg, "synth_report.json"),
                    dumps({"feasible": False, "objective": objective.variant, "v_r_kmh": v, "error": str(exc)}))
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    doc = rep.to_dict()
    doc["v_r_kmh"] = v
    doc["Cz_mode"] = cfg.Cz_mode
    doc["realization"] = list(Realization.base(cfg.gains).with_f23(rep.f23_star).as_array())
    _write_text(_path(cfg, "synth_report.json"), dumps(doc))
    _write_rows(_path(cfg, "grid_curve.csv"), ("f23", "feasible", "gamma", "trace", "objective", "status"),
                [(p.f23, int(p.feasible), p.gamma, p.trace, p.objective, p.status) for p in rep.table])
    log.info("f23*=%.6g objective=%.6g (%s)", rep.f23_star, rep.objective_star, rep.note or "ok")
    return EXIT_OK


def cmd_certify(cfg: Config, args):
    v = cfg.synth_v_r_kmh if args.vr is None else args.vr
    res = certify(args.f23, cfg.setup(v))
    doc = res.to_dict()
    doc["v_r_kmh"] = v
    _write_text(_path(cfg, "certify_report.json"), dumps(doc))
    if any(s not in (OPTIMAL, INFEASIBLE) for s in res.statuses.values()):
        log.error("solver failure during certification: %s", res.statuses)
        return EXIT_SOLVER
    if not res.passed:
        log.error("certification failed for f23=%g: %s", args.f23, res.statuses)
        return EXIT_INFEASIBLE
    log.info("certified f23=%g: gamma_min=%.6g trace_min=%.6g", args.f23, res.gamma_min, res.trace_min)
    return EXIT_OK


def _plot(cfg, name, t, series, ylabel, title):
    _write_text(_path(cfg, name), line_chart(t, series, title=title, xlabel="t [s]", ylabel=ylabel))


def _realization_from_args(cfg, args):
    if args.realization:
        vals = [float(x) for x in args.realization.split(",")]
        return Realization.from_array(vals)
    return Realization.base(cfg.gains).with_f23(args.f23)


def cmd_simulate(cfg: Config, args):
    sc = cfg.scenario()
    if args.vr is not None:
        sc = replace(sc, v_r=kmh(args.vr))
    if args.delay is not None:
        sc = replace(sc, delay=args.delay)
    F = _realization_from_args(cfg, args)
    traj = simulate(sc, F)
    nom = nominal_trajectory(replace(sc, delay=0.0))
    rep = rmse(traj, nom)
    write_csv(traj, _path(cfg, "trajectory.csv"))
    write_csv(nom, _path(cfg, "nominal.csv"))
    _write_text(_path(cfg, "simulate_report.json"),
                dumps({"realization": list(F.as_array()), "delay_s": sc.delay, **rep.to_dict()}))
    if not args.no_plots:
        _plot(cfg, "v2.svg", traj.t, {"nominal": nom.v2, "uncertain": traj.v2}, "v2 [m/s]", "follower velocity")
        _plot(cfg, "eps2.svg", traj.t, {"nominal": nom.eps2, "uncertain": traj.eps2}, "eps2 [m]", "spacing error")
    return EXIT_OK


def _case_outputs(cfg, table, reports, trajs, nominal, suffix, plots):
    for name, tr in trajs.items():
        write_csv(tr, _path(cfg, f"{name}{suffix}.csv"))
    if plots:
        series = {"nominal": nominal.v2, **{k: v.v2 for k, v in trajs.items()}}
        _plot(cfg, f"v2{suffix}.svg", nominal.t, series, "v2 [m/s]", "follower velocity")
        series = {"nominal": nominal.eps2, **{k: v.eps2 for k, v in trajs.items()}}
        _plot(cfg, f"eps2{suffix}.svg", nominal.t, series, "eps2 [m]", "spacing error")
    return {k: {"realization": list(table[k].as_array()), **reports[k].to_dict()} for k in table}


def cmd_case_study(cfg: Config, args):
    v = cfg.synth_v_r_kmh if args.vr is None else args.vr
    setup = cfg.setup(v)
    try:
        table = realization_table(setup, cfg.grid, workers=cfg.workers)
    except SynthesisError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    sc = replace(cfg.scenario(), delay=0.0)
    nominal = nominal_trajectory(sc)
    write_csv(nominal, _path(cfg, "nominal.csv"))
    reports, trajs = case_study(table, sc, reference=nominal)
    doc = {"synthesis_v_r_kmh": v, "scenario_v_r_kmh": cfg.scenario_v_r_kmh,
           "no_delay": _case_outputs(cfg, table, reports, trajs, nominal, "", not args.no_plots)}
    delay = args.delay if args.delay is not None else cfg.delay_s
    if delay > 0:
        reports_d, trajs_d = delay_study(table, sc, delay=delay)
        doc["delay_s"] = delay
        doc["delay"] = _case_outputs(cfg, table, reports_d, trajs_d, nominal, "_delay", not args.no_plots)
    _write_text(_path(cfg, "case_study.json"), dumps(doc))
    return EXIT_OK


def cmd_sweep(cfg: Config, args):
    objective = cfg.objective_spec()
    v_list = cfg.sweep_v_r_kmh
    try:
        rows = vr_sweep(objective, [kmh(x) for x in v_list], cfg.setup(), cfg.grid, workers=cfg.workers)
    except SynthesisError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    obj = [r.objective_star for r in rows]
    monotone = bool(np.all(np.diff(obj) >= 0))
    doc = {"objective": objective.variant, "monotone_objective": monotone,
           "rows": [{"v_r_kmh": k, "f23_star": r.f23_star, "objective_star": r.objective_star,
                     "gamma_star": r.gamma_star, "trace_star": r.trace_star} for k, r in zip(v_list, rows)]}
    _write_text(_path(cfg, "sweep_report.json"), dumps(doc))
    _write_rows(_path(cfg, "sweep.csv"), ("v_r_kmh", "f23_star", "objective_star", "gamma_star", "trace_star"),
                [(float(k), r.f23_star, r.objective_star, r.gamma_star, r.trace_star) for k, r in zip(v_list, rows)])
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "certify": cmd_certify, "simulate": cmd_simulate,
            "case-study": cmd_case_study, "sweep": cmd_sweep}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--objective", choices=("gamma", "trace", "both"), help="synthesis objective")
    common.add_argument("--vr", type=float, metavar="KMH", help="operating point / leader speed in km/h")
    common.add_argument("--delay", type=float, metavar="S", help="actuation delay in seconds")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--no-plots", action="store_true", help="do not write SVG plots")
    common.add_argument("--workers", type=int, help="parallel worker processes for grid search")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p = argparse.ArgumentParser(prog="pecacc", description="Robust PEC realizations for a CACC platoon.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="grid-search the optimal f23")
    c = sub.add_parser("certify", parents=[common], help="certify one realization")
    c.add_argument("--f23", type=float, default=0.0)
    s = sub.add_parser("simulate", parents=[common], help="simulate one realization")
    s.add_argument("--f23", type=float, default=0.0)
    s.add_argument("--realization", metavar="F21,F22,F23,F11,F12", help="all five realization entries")
    sub.add_parser("case-study", parents=[common], help="F0..F5 comparison")
    sub.add_parser("sweep", parents=[common], help="optimum over several operating points")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _prepare(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ClosedLoopError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG
    except SolverFailure as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except SimulationError as exc:
        log.error("simulation failed: %s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
