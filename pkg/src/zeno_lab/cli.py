"""``zeno-lab`` command-line front end.

    zeno-lab <subcommand> [--config FILE] [--jobs K] [--out DIR] [--format csv|json]
                          [--set key=value ...]

Exit codes: 0 success, 2 config error, 3 convergence failure, 4 engine failure.
Failures print a one-line JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import analytic, figures
from .analysis import rates_from_series, sweep_tau
from .config import ExperimentConfig, load_config, parse_override
from .dynamics import ZenoProtocol, run_zeno
from .errors import ConfigError, TruncationError, ZenoError
from .model import HilbertConfig, build_operators
from .io import Table, survival_table, sweep_table, transitions_doc, write_json, write_table, write_manifest

log = logging.getLogger("zeno_lab")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_ENGINE = 0, 2, 3, 4


class CommandResult:
    def __init__(self, files=None, extra=None, status=EXIT_OK):
        self.files = files or []
        self.extra = extra or {}
        self.status = status


def _emit(table: Table, args, stem: str, result: CommandResult):
    result.files.append(write_table(table, args.out, stem, args.format))


def cmd_simulate(cfg: ExperimentConfig, args) -> CommandResult:
    s = run_zeno(cfg.params, cfg.psi, cfg.protocol, cfg.integrator, cfg.n_max, cfg.adaptive)
    rates = rates_from_series(s)
    res = CommandResult(extra={"n_max_used": s.n_max, "converged": s.converged,
                               "top_population": s.top_population})
    _emit(survival_table(s, rates), args, "survival", res)
    return res


def cmd_sweep(cfg: ExperimentConfig, args) -> CommandResult:
    sw = sweep_tau(cfg.params, cfg.psi, cfg.n_list, cfg.tau_grid(), cfg.integrator,
                   cfg.n_max, jobs=args.jobs, frame=cfg.frame)
    res = CommandResult(extra={"n_max_used": sw.n_max_used, "converged": bool(sw.converged.all()),
                               "failed_cells": len(sw.errors)})
    _emit(sweep_table(sw), args, "sweep", res)
    res.files.append(write_json(transitions_doc(sw.transitions),
                                os.path.join(args.out, "transitions.json")))
    if sw.errors:
        res.extra["errors"] = sorted({msg for msg in sw.errors.values()})
        res.status = EXIT_CONVERGENCE
    return res


def cmd_figure(cfg: ExperimentConfig, args) -> CommandResult:
    data = figures.generate(args.name, cfg.integrator, jobs=args.jobs)
    res = CommandResult(extra={"figure": args.name, "preset": _preset_doc(args.name),
                               "summary": data.summary})
    for tag, table in data.tables.items():
        _emit(table, args, f"{args.name}_{tag}", res)
    for tag, doc in data.docs.items():
        res.files.append(write_json(doc, os.path.join(args.out, f"{args.name}_{tag}.json")))
    return res


def _preset_doc(name: str) -> dict:
    p = figures.PRESETS[name]
    return {"variant": p.variant, "delta": p.delta, "omega0": p.omega0,
            "panels": [vars(panel) for panel in p.panels], "taus": list(p.taus),
            "n_meas": p.n_meas, "t_max": p.t_max, "n_list": list(p.n_list),
            "pre_evolution_time": p.pre_evolution_time, "frame": p.frame,
            "measurement": p.measurement, "notes": p.notes}


def cmd_compare_rw(cfg: ExperimentConfig, args) -> CommandResult:
    """Master equation vs the rotating-wave closed forms.

    With ``measurement: none`` the unmeasured population is compared to |alpha(t)|^2
    (excited start) over ``[0, t_max]``; otherwise the survival after each
    measurement is compared to ``P_RW(tau)^n``.
    """
    p, psi = cfg.params, cfg.psi
    res = CommandResult(extra={"variant": p.variant.value})
    if p.variant.value != "jc":
        log.warning("the rotating-wave forms are exact only for variant=jc")
    if cfg.measurement == "none":
        if abs(abs(psi.alpha) - 1.0) > 1e-12:
            raise ConfigError("compare-rw with measurement=none requires state: e")
        samples = max(10, int(round(cfg.t_max / cfg.tau)) * max(1, cfg.samples_per_interval))
        dt = cfg.t_max / samples
        s = run_zeno(p, psi, ZenoProtocol(dt, samples, "none"), cfg.integrator, cfg.n_max,
                     cfg.adaptive, samples_per_interval=1)
        t, num = s.trajectory["t"], s.trajectory["rho_ee"]
        ana = np.abs(analytic.rw_alpha(t, p)) ** 2
        table = Table(["t", "P_numeric", "P_analytic", "residual"])
        for row in zip(t, num, ana, num - ana):
            table.add(*row)
    else:
        if cfg.measurement != "selective":
            raise ConfigError("compare-rw needs measurement: selective or none")
        s = run_zeno(p, psi, cfg.protocol, cfg.integrator, cfg.n_max, cfg.adaptive)
        p1 = analytic.rw_first_interval_general(psi, cfg.tau, p)
        n = np.arange(len(s.probs))
        ana = p1 ** n
        table = Table(["n", "t", "P_exact", "P_product", "deviation"])
        for row in zip(n, s.times, s.probs, ana, s.probs - ana):
            table.add(*row)
        num = s.probs
    res.extra.update(n_max_used=s.n_max, converged=s.converged,
                     max_abs_residual=float(np.max(np.abs(num - ana))))
    _emit(table, args, "compare_rw", res)
    return res


def cmd_compare_rate(cfg: ExperimentConfig, args) -> CommandResult:
    """Master equation vs the rate equation under non-selective measurements."""
    kind = "none" if cfg.measurement == "none" else "nonselective"
    prot = ZenoProtocol(cfg.tau, cfg.n, kind, pre_evolution_time=cfg.pre_evolution_time,
                        nonselective_mode=cfg.nonselective_mode)
    spi = max(1, cfg.samples_per_interval)
    s = run_zeno(cfg.params, cfg.psi, prot, cfg.integrator, cfg.n_max, cfg.adaptive,
                 samples_per_interval=spi)
    t, me = s.trajectory["t"], s.trajectory["rho_ee"]
    ee0 = abs(cfg.psi.alpha) ** 2
    rate = analytic.rate_equation_run(cfg.params, prot, t, ee0, reset=cfg.rate_reset).rho_ee
    table = Table(["t", "rho_ee_master", "rho_ee_rate", "difference"])
    for row in zip(t, me, rate, me - rate):
        table.add(*row)
    res = CommandResult(extra={"n_max_used": s.n_max, "converged": s.converged,
                               "max_abs_difference": float(np.max(np.abs(me - rate))),
                               "rate_min": float(rate.min()), "master_min": float(me.min())})
    _emit(table, args, "compare_rate", res)
    return res


def convergence_report(cfg: ExperimentConfig) -> dict:
    """Step-halving and truncation-doubling deltas for the configured protocol."""
    p, psi, prot, integ = cfg.params, cfg.psi, cfg.protocol, cfg.integrator
    base = run_zeno(p, psi, prot, integ, cfg.n_max, cfg.adaptive)
    doubled = run_zeno(p, psi, prot, integ, 2 * base.n_max, adaptive=False)
    halved = run_zeno(p, psi, prot, integ.halved(), base.n_max, adaptive=False)
    stiffness = build_operators(p, HilbertConfig(base.n_max)).stiffness
    d_trunc = float(np.max(np.abs(doubled.probs - base.probs)))
    d_step = float(np.max(np.abs(halved.probs - base.probs)))
    tol = cfg.convergence_tol
    return {"n_max": base.n_max, "n_max_doubled": doubled.n_max,
            "steps_per_interval": integ.n_steps(cfg.tau, p, stiffness), "truncation_delta": d_trunc,
            "step_delta": d_step, "tolerance": tol,
            "passed": bool(d_trunc < tol and d_step < tol and base.converged)}


def cmd_check_convergence(cfg: ExperimentConfig, args) -> CommandResult:
    report = convergence_report(cfg)
    res = CommandResult(extra={"convergence": report})
    res.files.append(write_json(report, os.path.join(args.out, "convergence.json")))
    if not report["passed"]:
        res.status = EXIT_CONVERGENCE
    return res


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-tau": cmd_sweep,
    "figure": cmd_figure,
    "compare-rw": cmd_compare_rw,
    "compare-rate": cmd_compare_rate,
    "check-convergence": cmd_check_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="YAML/JSON experiment config")
    common.add_argument("--jobs", type=int, default=1, metavar="K", help="worker processes for sweeps")
    common.add_argument("--out", default="out", metavar="DIR", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="zeno-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="survival series and decay rates")
    sub.add_parser("sweep-tau", parents=[common], help="Lambda_N(tau) sweep and transitions")
    fig = sub.add_parser("figure", parents=[common], help="regenerate a figure's data")
    fig.add_argument("name", choices=sorted(figures.PRESETS))
    sub.add_parser("compare-rw", parents=[common], help="master equation vs rotating-wave forms")
    sub.add_parser("compare-rate", parents=[common], help="master equation vs rate equation")
    sub.add_parser("check-convergence", parents=[common], help="step-halving / n_max-doubling deltas")
    return parser


def _fail(code: int, exc: BaseException) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, TruncationError):
        doc.update(n_max=exc.n_max, top_population=exc.top_population)
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        return _fail(EXIT_CONFIG, ConfigError("--jobs must be >= 1"))
    try:
        overrides = dict(parse_override(item) for item in args.set)
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)

    try:
        result = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except ZenoError as exc:
        return _fail(exc.exit_code, exc)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_ENGINE, exc)

    command = args.command + (f" {args.name}" if args.command == "figure" else "")
    extra = dict(result.extra, files=sorted(os.path.basename(f) for f in result.files),
                 exit_code=result.status)
    write_manifest(args.out, command, cfg.canonical(), extra)
    if result.status != EXIT_OK:
        msg = extra.get("convergence") or extra.get("errors")
        print(json.dumps({"error": "ConvergenceFailure", "message": msg, "exit_code": result.status},
                         sort_keys=True, default=str), file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
