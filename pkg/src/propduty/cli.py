"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import decision, montecarlo, verification
from ._io import write_csv, write_json
from .duty import (
    BaselineHumility,
    DomainError,
    DutyInputs,
    Exponential,
    Linear,
    Logistic,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("propduty")


class UsageError(Exception):
    pass


# --- argument types ---------------------------------------------------------


def _unit(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return x


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return n


def _seed(text: str) -> int:
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("must be a 64-bit unsigned integer")
    return s


def _lambda(text: str) -> float:
    x = _unit(text)
    if x >= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1)")
    return x


def _timestamp(text: str) -> datetime:
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO-8601 timestamp: {text!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _add_signal_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("signal function")
    g.add_argument("--g", choices=["linear", "exponential", "logistic"], default="linear",
                   help="form of the contextual signal function (default: linear)")
    g.add_argument("--gain", type=float, default=1.0, help="exponential gain (default: 1)")
    g.add_argument("--steepness", type=float, default=10.0, help="logistic steepness (default: 10)")
    g.add_argument("--midpoint", type=_unit, default=0.5, help="logistic midpoint (default: 0.5)")


def _signal(args):
    try:
        if args.g == "exponential":
            return Exponential(args.gain)
        if args.g == "logistic":
            return Logistic(args.steepness, args.midpoint)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    return Linear()


def _clock(args):
    fixed = getattr(args, "fixed_time", None)
    if fixed is not None:
        return lambda: fixed
    return lambda: datetime.now(timezone.utc)


def _f3(x: float) -> str:
    return f"{x:.3f}"


# --- subcommands ------------------------------------------------------------


def cmd_eval(args) -> int:
    try:
        inputs = DutyInputs(args.k, args.hi, args.c)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    sf = _signal(args)
    scenario = decision.Scenario(args.id, "", inputs, sf, BaselineHumility(args.lam))
    sink = decision.AuditLog(args.audit) if args.audit else None
    res = decision.evaluate_scenario(scenario, decision.PolicyThresholds(args.defer_below),
                                     sink, clock=_clock(args))
    b = res.breakdown
    if args.json:
        print(json.dumps(res.record.to_dict(), indent=2))
    else:
        print(f"K={_f3(inputs.k)} HI={_f3(inputs.hi)} C_signal={_f3(inputs.c_signal)} "
              f"g={sf.form} lambda={args.lam:g}")
        print(f"  D_action  {_f3(b.action)}")
        print(f"  D_repair  {_f3(b.repair)}")
        print(f"  D_total   {_f3(b.total)}")
        print(f"D_a={_f3(b.action)} D_r={_f3(b.repair)} D_total={_f3(b.total)} "
              f"{res.recommendation.value}")
    if res.audit_error:
        print(f"error: {res.audit_error}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = montecarlo.SimulationConfig(args.n, args.seed, _signal(args), BaselineHumility(args.lam))
    trials, summary = montecarlo.run(cfg, workers=args.workers)
    payload = summary.to_dict(cfg)
    if args.out:
        out = Path(args.out)
        montecarlo.write_trials_csv(out / "trials.csv", trials)
        write_json(out / "summary.json", payload)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_protocol(args) -> int:
    configs = montecarlo.protocol_configs(args.seed, args.n, args.lam, args.gain,
                                          args.steepness, args.midpoint)
    report = montecarlo.run_protocol(configs, out_dir=args.out, workers=args.workers)
    print(montecarlo.format_protocol_report(report))
    if report.files:
        print(f"\nwrote {len(report.files)} files under {args.out}")
    # divergences from published figures are reported, not failures
    return EXIT_OK if report.max_conservation_residual < 1e-9 else EXIT_FAIL


def cmd_ranking(args) -> int:
    sf = _signal(args)
    try:
        grid = verification.default_hi_grid(args.grid_step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.scenarios:
        scenarios = verification.load_scenarios(args.scenarios, validate=False)
    else:
        scenarios = verification.generate_scenarios(args.n, args.seed, sf)
    report = verification.verify_scenarios(scenarios, grid)
    print(f"preserved {report.preserved_count}/{report.n_scenarios} "
          f"over {len(grid)} humility values in [{grid[0]:g}, {grid[-1]:g}]")
    if args.out:
        out = Path(args.out)
        write_json(out / "ranking_report.json", report.to_dict())
        try:
            reference = verification.RankingScenario(args.k1, args.k2, args.k3, args.c, sf)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        verification.write_trajectories(out / "trajectories.csv",
                                        verification.check_ranking(reference, grid))
    if not report.all_preserved:
        print("first violation:", json.dumps(report.first_violation, indent=2))
        return EXIT_FAIL
    return EXIT_OK


def cmd_batch(args) -> int:
    if args.case_studies == bool(args.file):
        raise UsageError("give either a scenario file or --case-studies")
    if args.case_studies:
        scenarios = list(decision.CASE_STUDIES)
    else:
        try:
            scenarios = decision.load_scenarios(args.file)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.file}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    thresholds = decision.PolicyThresholds(args.defer_below)
    sink = decision.AuditLog(args.audit) if args.audit else None
    clock = _clock(args)
    results = [decision.evaluate_scenario(s, thresholds, sink, clock) for s in scenarios]

    if args.json:
        print(json.dumps([r.record.to_dict() for r in results], indent=2))
    else:
        print(f"{'id':<26} {'K':>5} {'HI':>5} {'C':>5} {'D_a':>6} {'D_r':>6} {'D_total':>7}  rec")
        for s, r in zip(scenarios, results):
            i, b = s.inputs, r.breakdown
            print(f"{s.id:<26} {_f3(i.k):>5} {_f3(i.hi):>5} {_f3(i.c_signal):>5} "
                  f"{_f3(b.action):>6} {_f3(b.repair):>6} {_f3(b.total):>7}  {r.recommendation.value}")
    errors = [r.audit_error for r in results if r.audit_error]
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_USAGE if errors else EXIT_OK


SWEEP_HEADER = ("hi", "d_action", "d_repair", "d_total", "recommendation", "crossover")


def cmd_sweep(args) -> int:
    sf = _signal(args)
    points = decision.humility_sweep(args.k, args.c, sf, args.steps,
                                     decision.PolicyThresholds(args.defer_below))
    cross = decision.crossover_index(points) if args.k > 0 else None
    rows = [(p.hi, p.breakdown.action, p.breakdown.repair, p.breakdown.total,
             p.recommendation.value, int(i == cross)) for i, p in enumerate(points)]
    if args.out:
        write_csv(args.out, SWEEP_HEADER, rows)
    print(f"{'hi':>6} {'D_a':>6} {'D_r':>6} {'D_total':>7}  rec")
    for hi, a, r, t, rec, flag in rows:
        print(f"{_f3(hi):>6} {_f3(a):>6} {_f3(r):>6} {_f3(t):>7}  {rec:<6}{'  <- crossover' if flag else ''}")
    print(f"crossover hi* = {decision.crossover_humility(args.c, sf):.6f}")
    return EXIT_OK


_ZONE_CODE = {
    verification.Zone.HIGH_DUTY: "H",
    verification.Zone.LOW_DUTY: "L",
    verification.Zone.EQUILIBRIUM: "E",
    verification.Zone.UNZONED: ".",
}


def cmd_zones(args) -> int:
    try:
        grid = verification.default_hi_grid(args.step, cap=1.0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cells = [(hi, c, verification.classify_zone(hi, c)) for hi in grid for c in grid]
    if args.format == "json":
        print(json.dumps([{"hi": hi, "c_signal": c, "zone": z.value} for hi, c, z in cells], indent=2))
    elif args.format == "csv":
        w = sys.stdout
        w.write("hi,c_signal,zone\n")
        for hi, c, z in cells:
            w.write(f"{hi!r},{c!r},{z.value}\n")
    else:
        print("rows: HI, columns: C_signal   H=high duty  L=low duty  E=equilibrium  .=unzoned")
        print("      " + " ".join(f"{c:>4.2f}" for c in grid))
        for hi in grid:
            codes = (_ZONE_CODE[verification.classify_zone(hi, c)] for c in grid)
            print(f"{hi:>5.2f} " + " ".join(f"{code:>4}" for code in codes))
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="propduty",
                                     description="Proportional duty evaluation and verification.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate one epistemic state")
    p.add_argument("--k", type=_unit, required=True, help="knowledge magnitude in [0, 1]")
    p.add_argument("--hi", type=_unit, required=True, help="humility index in [0, 1]")
    p.add_argument("--c", type=_unit, required=True, help="contextual signal in [0, 1]")
    _add_signal_args(p)
    p.add_argument("--lambda", dest="lam", type=_lambda, default=0.05,
                   help="baseline humility floor (default: 0.05)")
    p.add_argument("--defer-below", type=_unit, default=0.2,
                   help="total duty under which the policy defers (default: 0.2)")
    p.add_argument("--id", default="cli-eval", help="scenario id recorded in the audit line")
    p.add_argument("--audit", metavar="PATH", help="append an audit record to this JSON Lines file")
    p.add_argument("--json", action="store_true", help="print the audit record as JSON")
    p.add_argument("--fixed-time", type=_timestamp, help="use this timestamp instead of now")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="run one seeded Monte Carlo configuration")
    p.add_argument("--n", type=_positive_int, default=montecarlo.DEFAULT_TRIALS)
    p.add_argument("--seed", type=_seed, default=0)
    _add_signal_args(p)
    p.add_argument("--lambda", dest="lam", type=_lambda, default=0.05)
    p.add_argument("--out", metavar="DIR", help="write trials.csv and summary.json here")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("protocol", help="run all three signal forms and report against published figures")
    p.add_argument("--n", type=_positive_int, default=montecarlo.DEFAULT_TRIALS)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--lambda", dest="lam", type=_lambda, default=0.05)
    p.add_argument("--gain", type=float, default=1.0, help="exponential gain (default: 1)")
    p.add_argument("--steepness", type=float, default=10.0)
    p.add_argument("--midpoint", type=_unit, default=0.5)
    p.add_argument("--out", metavar="DIR", help="write per-form CSV/JSON and the report here")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("ranking", help="verify ranking preservation across humility")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--grid-step", type=float, default=0.05)
    _add_signal_args(p)
    p.add_argument("--scenarios", metavar="FILE",
                   help="verify scenarios from a JSON file instead of generating them")
    p.add_argument("--out", metavar="DIR", help="write ranking_report.json and trajectories.csv")
    p.add_argument("--k1", type=_unit, default=0.80)
    p.add_argument("--k2", type=_unit, default=0.50)
    p.add_argument("--k3", type=_unit, default=0.10)
    p.add_argument("--c", type=_unit, default=0.60, help="signal for the exported trajectories")
    p.set_defaults(func=cmd_ranking)

    p = sub.add_parser("batch", help="evaluate a batch of named scenarios")
    p.add_argument("file", nargs="?", help="JSON array of scenario objects")
    p.add_argument("--case-studies", "--paper-cases", dest="case_studies", action="store_true",
                   help="use the four built-in case studies")
    p.add_argument("--audit", metavar="PATH")
    p.add_argument("--defer-below", type=_unit, default=0.2)
    p.add_argument("--json", action="store_true")
    p.add_argument("--fixed-time", type=_timestamp)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("sweep", help="sweep humility from 0 to 1 at fixed K and C")
    p.add_argument("--k", type=_unit, required=True)
    p.add_argument("--c", type=_unit, required=True)
    _add_signal_args(p)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--defer-below", type=_unit, default=0.2)
    p.add_argument("--out", metavar="FILE", help="write the sweep as CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("zones", help="print the zone classification over a grid")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.set_defaults(func=cmd_zones)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "steps", 2) < 2:
        parser.error("argument --steps: must be >= 2")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
