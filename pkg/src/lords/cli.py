"""Command-line interface.

Subcommands::

    lords targets  --scenario A                 target doses for a theta
    lords solve    "III'" --scenario A          solve and verify one problem
    lords batch    configs/scenario_a.yaml      run a full configuration
    lords verify   --problem II --design 0.92:0.45,2.75:0.09,4.38:0.46 --scenario A
    lords compare  --scenario A                 efficiency/score table incl. RWR

Exit status is 0 when every checked design passes the equivalence check,
2 when a solve finished but verification failed (or a problem could not be
solved) and 1 on configuration or runtime errors.  ``LORDS_SEED`` overrides
the default PSO seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace

from lords import __version__
from lords.config import (
    ALL_PROBLEMS,
    DoseSetup,
    RunConfig,
    default_seed,
    load_config,
)
from lords.cr_model import (
    ConditionalEfficacy,
    ContinuousInterval,
    DiscreteGrid,
    NeutralProbability,
    ThetaParams,
)
from lords.errors import ConfigError, LordsError
from lords.evaluation import GET_TOL, EfficiencyReport
from lords.information import DesignMeasure
from lords.problems import build_named
from lords.pso import PsoConfig
from lords.report import export, report_json, run, sensitivity, targets_block
from lords.scenarios import DEFAULT_GAMMA, DEFAULT_GRID, SCENARIOS

EXIT_OK, EXIT_ERROR, EXIT_GET = 0, 1, 2


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", choices=sorted(SCENARIOS), type=str.upper, help="preset scenario")
    g.add_argument("--theta", nargs=4, type=float, metavar=("T1", "T2", "T3", "T4"), help="explicit parameters")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="target toxicity level (default 0.2)")
    p.add_argument("--grid", nargs="+", type=float, help="dose grid (default: the 9-dose reference grid)")
    p.add_argument("--interval", nargs=2, type=float, metavar=("LO", "HI"), help="continuous dose interval")
    p.add_argument("--raw", action="store_true", help="doses are on the raw scale; take natural logs")
    m = p.add_mutually_exclusive_group()
    m.add_argument("--delta", type=float, help="MinED: neutral probability level (default 0.2)")
    m.add_argument("--efficacy-level", type=float, help="MinED: conditional efficacy level instead")


def _add_pso_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="PSO seed (default: $LORDS_SEED or built-in)")
    p.add_argument("--restarts", type=int, default=None, help="independent PSO restarts (default 10)")
    p.add_argument("--max-iters", type=int, default=None, help="PSO iteration budget (default 1500)")


def _to_log(values, raw: bool):
    if not raw:
        return list(values)
    if any(v <= 0 for v in values):
        raise ConfigError("raw doses must be positive")
    return [math.log(v) for v in values]


def _model(args) -> tuple[ThetaParams, str | None, DoseSetup, float]:
    if args.scenario:
        theta, label = SCENARIOS[args.scenario], args.scenario
    else:
        theta, label = ThetaParams.from_sequence(args.theta), None
    grid = DiscreteGrid(tuple(_to_log(args.grid, args.raw))) if args.grid else DEFAULT_GRID
    if args.interval:
        lo, hi = _to_log(args.interval, args.raw)
        interval = ContinuousInterval(lo, hi)
    else:
        interval = grid.interval()
    if args.efficacy_level is not None:
        mined_def = ConditionalEfficacy(args.efficacy_level)
    else:
        mined_def = NeutralProbability(args.delta if args.delta is not None else 0.2)
    return theta, label, DoseSetup(grid, interval, mined_def), args.gamma


def _pso(args) -> PsoConfig:
    seed = getattr(args, "seed", None)
    changes = {"seed": seed if seed is not None else default_seed()}
    if getattr(args, "restarts", None) is not None:
        changes["restarts"] = args.restarts
    if getattr(args, "max_iters", None) is not None:
        changes["max_iters"] = args.max_iters
    return PsoConfig().with_(**changes)


def _run_config(args, problems, rwr: bool) -> RunConfig:
    theta, label, setup, gamma = _model(args)
    return RunConfig(theta=theta, setup=setup, gamma=gamma, problems=tuple(problems),
                     pso=_pso(args), rwr=rwr, name=label or "run", scenario=label)


def _fmt_design(d: DesignMeasure) -> str:
    return "  ".join(f"{x:.2f} ({w:.2f})" for x, w in zip(d.points, d.weights))


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.2f}"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_targets(args) -> int:
    cfg = _run_config(args, (), rwr=False)
    t = targets_block(cfg)
    if args.json:
        print(json.dumps(t, indent=2))
        return EXIT_OK
    c, g = t["continuous"], t["grid"]
    print(f"{'target':<8}{'log-dose':>10}{'grid':>8}{'grid dose':>11}")
    for key, label in (("mined", "MinED"), ("obd", "OBD"), ("mtd", "MTD")):
        print(f"{label:<8}{c[key]:>10.3f}{'x' + str(g[key]['index']):>8}{g[key]['dose']:>11.2f}")
    if c["window_empty"]:
        print("therapeutic window is empty (MinED > MTD)")
    return EXIT_OK


def cmd_solve(args) -> int:
    name = args.problem
    cfg = _run_config(args, (name,), rwr=False)
    report = run(cfg)
    p = report.problem(name)
    if args.json:
        print(report_json(report))
    elif p.status != "ok":
        print(f"{name}: {p.error}", file=sys.stderr)
    else:
        print(f"{name}: {_fmt_design(p.design)}")
        print(f"criterion {p.criterion_value:.6g}; GET max phi {p.curve.max_violation:.2e} "
              f"({'pass' if p.get_passed else 'FAIL'})")
        if p.efficiency is not None:
            e = p.efficiency
            print(f"d_eff {e.d_eff:.2f}  c_eff {e.c_eff:.2f}  delta {e.delta:.2f}  s {e.s:.2f}  score {e.score:.2f}")
    if p.status != "ok":
        return EXIT_GET
    return report.exit_code()


def cmd_batch(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, pso=cfg.pso.with_(seed=args.seed))
    report = run(cfg)
    paths = export(report, args.out, args.format)
    for p in report.problems:
        if p.status == "ok":
            flag = "pass" if p.get_passed else "FAIL"
            print(f"{p.name:<5} GET {flag}  max phi {p.curve.max_violation:.2e}  {_fmt_design(p.design)}")
        else:
            print(f"{p.name:<5} ERROR {p.error}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_GET if report.any_error else report.exit_code()


def _parse_design(text: str) -> DesignMeasure:
    pairs = []
    for item in text.split(","):
        try:
            x, w = item.split(":")
            pairs.append((float(x), float(w)))
        except ValueError:
            raise ConfigError(f"bad design item {item!r}; expected dose:weight") from None
    total = sum(w for _, w in pairs)
    if total <= 0:
        raise ConfigError("design weights must sum to a positive value")
    return DesignMeasure.normalized([x for x, _ in pairs], [w for _, w in pairs])


def cmd_verify(args) -> int:
    theta, _, setup, gamma = _model(args)
    problem = build_named(args.problem, theta, setup.grid, setup.interval, gamma, setup.mined_definition)
    design = _parse_design(args.design)
    outside = [x for x in design.points if not problem.contains(x, atol=args.atol)]
    if outside:
        print(f"support points outside the restricted space {problem.resolved_bounds}: {outside}")
        return EXIT_GET
    curve = sensitivity(problem, design, args.points)
    for x, r in curve.support_residuals:
        print(f"phi({x:.4f}) = {r:+.2e}")
    ok = curve.passed(args.tol)
    print(f"max phi over {problem.name} space: {curve.max_violation:+.2e} ({'pass' if ok else 'FAIL'}, tol {args.tol:g})")
    return EXIT_OK if ok else EXIT_GET


def cmd_compare(args) -> int:
    cfg = _run_config(args, ALL_PROBLEMS, rwr=True)
    report = run(cfg)
    rows = [(p.name, p.efficiency, p.get_passed, p.error) for p in report.problems]
    if report.rwr:
        eff = report.rwr.get("efficiency")
        rows.append(("RWR", EfficiencyReport(**eff) if eff else None, None, report.rwr.get("error")))
    print(f"{'design':<7}{'d_eff':>7}{'c_eff':>7}{'delta':>7}{'s':>7}{'score':>7}  GET")
    for name, e, passed, err in rows:
        if e is None:
            print(f"{name:<7}  {err or 'unavailable'}")
            continue
        get = "-" if passed is None else ("pass" if passed else "FAIL")
        print(f"{name:<7}{_fmt(e.d_eff):>7}{_fmt(e.c_eff):>7}{_fmt(e.delta):>7}{_fmt(e.s):>7}{_fmt(e.score):>7}  {get}")
    if args.out:
        for path in export(report, args.out, ("json", "csv")):
            print(f"wrote {path}")
    return EXIT_GET if report.any_error else report.exit_code()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lords", description="Locally optimal restricted dose-finding designs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("targets", help="print MTD, OBD and MinED")
    _add_model_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_targets)

    p = sub.add_parser("solve", help="solve one design problem")
    p.add_argument("problem", help="I, II, III, IV; append ' (or p) for the dose grid")
    _add_model_args(p)
    _add_pso_args(p)
    p.add_argument("--json", action="store_true", help="print the full JSON report")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("batch", help="run a YAML configuration")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--format", nargs="+", choices=("json", "csv"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("verify", help="equivalence check of a given design")
    p.add_argument("--problem", required=True)
    p.add_argument("--design", required=True, help="comma-separated dose:weight pairs")
    _add_model_args(p)
    p.add_argument("--tol", type=float, default=GET_TOL)
    p.add_argument("--atol", type=float, default=0.01,
                   help="slack for support points outside the bounds (default covers 2-decimal rounding)")
    p.add_argument("--points", type=int, default=2001, help="curve samples on an interval")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="efficiency and score table for all eight designs and the RWR")
    _add_model_args(p)
    _add_pso_args(p)
    p.add_argument("--out", default=None, help="also export the report here")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LordsError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
