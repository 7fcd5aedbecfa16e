"""Command-line front end: ``supplynet <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import PipelineError, SupplyNetError
from .network import validate_costs
from .report import build_reports
from .scenario import (
    Scenario,
    output_dir,
    parse_scenario,
    preset_path,
    read_pmfs_csv,
    read_thresholds_csv,
    run_propagation,
    run_scenario,
    simulate,
    solve_all,
    thresholds_csv,
    write_propagation,
    write_simulation,
    write_text,
)

log = logging.getLogger("supplynet")


def _load(arg: str, seed: int | None) -> Scenario:
    path = Path(arg)
    if not path.exists() and preset_path(arg).exists():
        path = preset_path(arg)
    s = parse_scenario(path)
    return s.with_seed(seed) if seed is not None else s


def cmd_validate(args) -> int:
    s = _load(args.scenario, args.seed_override)
    net = s.network
    report = validate_costs(net)
    log.info("%s: %d firms, depth %d, distributors %s, %d shock(s)", s.name, net.n, net.depth,
             ", ".join(net.firms[i].name for i in net.distributors), len(s.shocks))
    for w in report.warnings:
        log.warning("cost check: %s", w.message)
    return 0


def cmd_propagate(args) -> int:
    s = _load(args.scenario, args.seed_override)
    out = output_dir(s, args.out)
    result = run_propagation(s, args.workers)
    write_propagation(s, out, result)
    log.info("propagated demand for %d firms into %s", len(result.pmfs), out)
    return 0


def cmd_solve(args) -> int:
    s = _load(args.scenario, args.seed_override)
    out = output_dir(s, args.out)
    cached = out / "pmfs.csv"
    if cached.exists():
        pmfs = read_pmfs_csv(s.network, cached.read_text())
        policies, _ = solve_all(s, pmfs)
        write_text(out, "thresholds.csv", thresholds_csv(s.network, policies))
        log.info("solved %d firms from cached pmfs in %s", len(policies), out)
    else:
        result = run_propagation(s, args.workers)
        write_propagation(s, out, result)
        log.info("no cached pmfs; propagated and solved into %s", out)
    return 0


def cmd_simulate(args) -> int:
    s = _load(args.scenario, args.seed_override)
    out = output_dir(s, args.out)
    cached = out / "thresholds.csv"
    if cached.exists():
        policies, raised = read_thresholds_csv(s.network, cached.read_text())
        log.info("using cached thresholds from %s", cached)
    else:
        result = run_propagation(s, args.workers)
        write_propagation(s, out, result)
        policies, raised = result.policies, result.raised_upper
    trace = simulate(s, policies, raised)
    write_simulation(s, out, trace)
    log.info("simulated %d steps, network cost %.2f", trace.steps, trace.ledger.network[-1])
    return 0


def cmd_run(args) -> int:
    s = _load(args.scenario, args.seed_override)
    out = run_scenario(s, args.out, args.workers)
    log.info("wrote bundle to %s", out)
    return 0


def cmd_report(args) -> int:
    out = args.out if args.out is not None else args.bundles[0]
    for p in build_reports(args.bundles, out):
        log.info("wrote %s", p)
    return 0


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the flags without defaults so values given before the subcommand survive
    def d(v):
        return argparse.SUPPRESS if suppress else v

    parser.add_argument("--seed-override", type=int, default=d(None), help="replace the simulation seed")
    parser.add_argument("--out", default=d(None), help="output directory (default: the scenario's own)")
    parser.add_argument("-q", "--quiet", action="store_true", default=d(False), help="only print errors")
    parser.add_argument("--workers", type=int, default=d(1), help="threads for per-firm solves")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = argparse.ArgumentParser(prog="supplynet", description=__doc__)
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("validate", cmd_validate, "parse a scenario and check cost plausibility"),
        ("propagate", cmd_propagate, "estimate supplier demand pmfs and solve every firm"),
        ("solve", cmd_solve, "solve every firm (reuses cached pmfs.csv)"),
        ("simulate", cmd_simulate, "run the simulation (reuses cached thresholds.csv)"),
        ("run", cmd_run, "full pipeline into a fresh bundle"),
    ):
        sp = sub.add_parser(name, help=helptext, parents=[common])
        sp.add_argument("scenario", help="scenario file, or a preset name: ideal, outage, demand_shock")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("report", help="long-format figure CSVs from bundles", parents=[common])
    sp.add_argument("bundles", nargs="+", help="bundle directories")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", force=True)
    try:
        return args.func(args)
    except PipelineError as exc:
        log.error("%s", exc)
        return 3
    except SupplyNetError as exc:
        problems = getattr(exc, "problems", None)
        for msg in problems or [str(exc)]:
            log.error("%s: %s", type(exc).__name__, msg)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
