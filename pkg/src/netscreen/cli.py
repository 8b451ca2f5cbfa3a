"""Command-line front end.

    netscreen --config scenario.ini estimate
    netscreen --config scenario.ini allocate
    netscreen --config scenario.ini simulate [--plan plan.csv] [--strategy NAME]
    netscreen --config scenario.ini compare

Exit codes: 0 success, 1 validation error, 2 parse or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import STRATEGIES, load_config
from .epi import load_case_series, simulate
from .errors import DimensionMismatch, ParseError, ValidationError
from .net import load_tables
from .outputs import read_plan, write_json, write_plan, write_report, write_trace
from .scenario import disease_rates, compare, fit_history, load_scenario, network_plan, run_strategy


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _clean(d: dict) -> dict:
    return json.loads(json.dumps(d, default=_jsonable))


def _out_dir(args, config) -> Path:
    out = Path(args.out) if args.out else config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_estimate(args, config) -> int:
    dist, N = load_tables(config.distances, config.populations)
    if config.cases is None:
        raise ParseError("estimation needs a case series ([data] cases)", path=config.source)
    obs = load_case_series(config.cases, dist.labels, N)
    beta, gamma = disease_rates(config)
    result, h0 = fit_history(config, dist, obs, beta, gamma, force_both=True)
    out = _out_dir(args, config)
    payload = {
        "config": config.as_dict(),
        "beta_hat": beta,
        "gamma_hat": gamma,
        "alpha_hat": result.alpha_hat,
        "lambda_hat": result.lambda_hat,
        "objective": result.objective_value,
        "estimator": result.estimator_id,
        "diagnostics": result.search_diagnostics,
        "h0": dict(zip(dist.labels, h0)),
    }
    path = out / "estimate.json"
    write_json(path, _clean(payload))
    print(f"alpha={result.alpha_hat:.6g} lambda={result.lambda_hat:.6g} objective={result.objective_value:.6g} -> {path}")
    return 0


def cmd_allocate(args, config) -> int:
    scn = load_scenario(config)
    out = _out_dir(args, config)
    result = network_plan(scn, verify_lp=args.verify_lp, log_path=out / "fw_log.jsonl")
    resolved = _clean(scn.resolved())
    path = out / "plan.csv"
    write_plan(path, result.plan, scn.labels, resolved)
    summary = {
        "config": resolved,
        "objective": result.objective,
        "initial_objective": result.initial_objective,
        "iterations": result.iterations,
        "stopped_early": result.stopped_early,
        "polished_from": result.polished_from,
        "lp_checks": result.lp_checks,
        "lp_discrepancies": result.lp_discrepancies,
    }
    write_json(out / "allocate.json", _clean(summary))
    print(f"surrogate {result.initial_objective:.6g} -> {result.objective:.6g} in {result.iterations} iterations -> {path}")
    if args.verify_lp:
        print(f"lp checks: {result.lp_checks}, discrepancies: {result.lp_discrepancies}")
    return 0


def cmd_simulate(args, config) -> int:
    scn = load_scenario(config)
    out = _out_dir(args, config)
    if args.plan:
        plan, _ = read_plan(args.plan, scn.labels)
        if (plan.t0, plan.T) != (config.t0, config.T):
            raise DimensionMismatch(f"plan covers days {plan.t0}..{plan.T}, scenario needs {config.t0}..{config.T}")
        plan.validate(scn.N, scn.a_max)
        trace = simulate(scn.initial, scn.params, scn.weights, scn.N, plan)
        name = "plan"
    else:
        name = args.strategy
        trace = run_strategy(scn, name)
    path = out / f"trace_{name}.csv"
    write_trace(path, trace, scn.labels, _clean(scn.resolved()))
    total = trace.new_confirmed.sum()
    print(f"{name}: cumulative confirmed at day {config.T} = {total:.6g} -> {path}")
    return 0


def cmd_compare(args, config) -> int:
    scn = load_scenario(config)
    out = _out_dir(args, config)
    log = out / "fw_log.jsonl" if "network" in config.strategies else None
    report = compare(scn, verify_lp=args.verify_lp, log_path=log)
    resolved = _clean(scn.resolved())
    paths = write_report(out, report, scn.labels, resolved)
    if report.fw is not None:
        write_plan(out / "plan.csv", report.fw.plan, scn.labels, resolved)
    for name, series in report.cumulative.items():
        print(f"{name:>15}: C_cum({config.T}) = {series[-1]:.6g}")
    if args.verify_lp and report.fw is not None:
        print(f"lp checks: {report.fw.lp_checks}, discrepancies: {report.fw.lp_discrepancies}")
    print("wrote " + ", ".join(str(p) for p in paths))
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "allocate": cmd_allocate,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default, help="scenario file (INI sections)")
    parser.add_argument("--out", metavar="DIR", default=default, help="output directory (overrides [output] dir)")
    parser.add_argument(
        "--verify-lp",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="cross-check each greedy direction against the simplex solver",
    )
    parser.add_argument(
        "--seedless",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="no-op: every computation is deterministic and uses no random numbers",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netscreen",
        description="Epidemic screening and vaccination allocation on a county commute network.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "estimate": "fit alpha and lambda on the case history and forecast h0",
        "allocate": "compute the network testing (or vaccination) plan",
        "simulate": "simulate one plan or strategy and write the full trace",
        "compare": "simulate every configured strategy and write the comparison report",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _global_flags(p, suppress=True)
        if name == "simulate":
            p.add_argument("--plan", metavar="PATH", help="plan file written by allocate")
            p.add_argument("--strategy", choices=STRATEGIES, default="none", help="strategy used without --plan")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        parser.error("--config is required")
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except ValidationError as exc:
        print(f"netscreen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ParseError, OSError) as exc:
        print(f"netscreen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
