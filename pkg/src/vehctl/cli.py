"""Command line entry point: tune, run, compare, sweep."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .harness import io
from .harness.scenario import ScenarioError, build_scenario, load_config
from .harness.sim import compare, run, sweep, tune
from .mpc import ENHANCED, STANDARD

EXIT_OK, EXIT_SCENARIO, EXIT_ABORTED, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("vehctl")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--scenario", default="double_lane_change",
                   help="scenario file, or the name of a shipped scenario")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--timing", action="store_true",
                   help="record MPC solve times (makes CSVs non-reproducible)")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="vehctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("tune", parents=[common], help="PSO-tune the speed PID, write gains")
    p = sub.add_parser("run", parents=[common], help="simulate one scenario")
    p.add_argument("--cost-mode", choices=(STANDARD, ENHANCED), default=None)
    sub.add_parser("compare", parents=[common], help="standard vs enhanced MPC cost")
    p = sub.add_parser("sweep", parents=[common], help="vary one config key over a list")
    p.add_argument("--key", required=True, help="dotted key, e.g. mpc.beta")
    p.add_argument("--values", required=True,
                   help="comma-separated values, each parsed as YAML")
    p.add_argument("--cost-mode", choices=(STANDARD, ENHANCED), default=None)
    return parser


def _emit(args, text):
    if not args.quiet:
        print(text, end="" if text.endswith("\n") else "\n")


def _cmd_tune(args, out):
    scenario = build_scenario(load_config(args.scenario), args.seed)
    gains, result = tune(scenario)
    (out / "gains.txt").write_text(
        f"K_p={gains.K_p!r}\nK_i={gains.K_i!r}\nK_d={gains.K_d!r}\n"
        f"speed_mse={result.best_fitness!r}\n")
    result.export_history(out / "pso_history.csv")
    _emit(args, f"K_p={gains.K_p:.6g} K_i={gains.K_i:.6g} K_d={gains.K_d:.6g} "
                f"speed MSE={result.best_fitness:.4e}")
    return EXIT_OK


def _cmd_run(args, out):
    scenario = build_scenario(load_config(args.scenario), args.seed)
    result = run(scenario, args.cost_mode, timing=args.timing)
    io.export_csv(result, out / f"trace_{result.cost_mode}.csv")
    io.write_summary([result], out / "summary.txt")
    text = io.report([result])
    (out / "report.txt").write_text(text)
    _emit(args, text)
    return EXIT_ABORTED if result.aborted else EXIT_OK


def _cmd_compare(args, out):
    scenario = build_scenario(load_config(args.scenario), args.seed)
    results = compare(scenario, timing=args.timing)
    for r in results:
        io.export_csv(r, out / f"compare_{r.cost_mode}.csv")
    io.write_summary(results, out / "summary.txt")
    text = io.report(results)
    (out / "report.txt").write_text(text)
    _emit(args, text)
    return EXIT_ABORTED if any(r.aborted for r in results) else EXIT_OK


def _cmd_sweep(args, out):
    config = load_config(args.scenario)
    values = [yaml.safe_load(v) for v in args.values.split(",")]
    try:
        results = sweep(config, args.key, values, args.seed, args.cost_mode)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{args.key}: {exc}") from exc
    lines = []
    for i, (value, r) in enumerate(zip(values, results)):
        io.export_csv(r, out / f"sweep_{i:03d}.csv")
        lines += [f"{i}.{args.key}={value!r}"] + io.summary_lines(r, f"{i}.")
        s = r.summary
        _emit(args, f"{args.key}={value!r}: position MSE {s['position_mse']:.4e}, "
                    f"heading MSE {s['heading_mse']:.4e}, speed MSE {s['speed_mse']:.4e}")
    (out / "sweep_summary.txt").write_text("\n".join(lines) + "\n")
    return EXIT_ABORTED if any(r.aborted for r in results) else EXIT_OK


COMMANDS = {"tune": _cmd_tune, "run": _cmd_run, "compare": _cmd_compare, "sweep": _cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory %s: %s", out, exc)
        return EXIT_IO
    try:
        return COMMANDS[args.command](args, out)
    except ScenarioError as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_SCENARIO
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
