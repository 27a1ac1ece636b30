"""Batch execution of design problems and report export.

``run`` solves the reference problems first (``I``/``III`` and their grid
versions by default) so every requested design can be scored against them,
then solves, verifies and scores each requested problem.  A problem that
cannot be built or solved is recorded with its error and the batch moves
on.  ``export`` writes the report as one JSON document and a handful of
flat CSV tables.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from lords import __version__
from lords.config import DoseSetup, RunConfig, config_to_dict
from lords.cr_model import discrete_targets, target_doses
from lords.errors import LordsError
from lords.evaluation import (
    GET_TOL,
    EfficiencyReport,
    SensitivityCurve,
    c_efficiency,
    d_efficiency,
    drop_zero_weights,
    efficiencies,
    rwr_stationary,
    sensitivity_c,
    sensitivity_d,
)
from lords.information import DesignMeasure, c_vector
from lords.problems import Criterion, DesignProblem, build_named, solve

logger = logging.getLogger(__name__)

DESIGN_COLUMNS = ("scenario", "problem", "point", "dose", "weight")
EFFICIENCY_COLUMNS = ("scenario", "design", "d_eff", "c_eff", "delta", "s", "score",
                      "relative_d_eff", "relative_c_eff")
SENSITIVITY_COLUMNS = ("scenario", "problem", "dose", "value")
RADAR_COLUMNS = ("scenario", "design", "d_eff", "c_eff", "s")
TARGET_COLUMNS = ("scenario", "space", "target", "dose", "grid_index")


@dataclass
class ProblemReport:
    name: str
    status: str = "ok"
    error: str | None = None
    bounds: list[float] | None = None
    design: DesignMeasure | None = None
    criterion_value: float | None = None
    iterations: int | None = None
    restart_index: int | None = None
    curve: SensitivityCurve | None = None
    efficiency: EfficiencyReport | None = None
    relative: dict[str, float] | None = None
    baseline_design: DesignMeasure | None = None

    @property
    def get_passed(self) -> bool | None:
        return None if self.curve is None else self.curve.passed(GET_TOL)


@dataclass
class RunReport:
    config: RunConfig
    targets: dict[str, Any]
    problems: list[ProblemReport]
    rwr: dict[str, Any] | None
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.config.scenario or self.config.name

    def problem(self, name: str) -> ProblemReport:
        for p in self.problems:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def all_passed(self) -> bool:
        return all(p.get_passed for p in self.problems if p.status == "ok")

    @property
    def any_error(self) -> bool:
        return any(p.status != "ok" for p in self.problems)

    def exit_code(self) -> int:
        """0 when every solved design passes GET, 2 otherwise."""
        return 0 if self.all_passed else 2

    def to_dict(self) -> dict[str, Any]:
        return _clean({
            "provenance": self.provenance,
            "config": config_to_dict(self.config),
            "targets": self.targets,
            "problems": [_problem_dict(p) for p in self.problems],
            "rwr": self.rwr,
            "summary": {
                "all_get_passed": self.all_passed,
                "errors": [p.name for p in self.problems if p.status != "ok"],
            },
        })


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """Make ``obj`` strict-JSON safe: numpy scalars to Python, inf/nan to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _design_dict(d: DesignMeasure | None):
    if d is None:
        return None
    return [{"dose": x, "weight": w} for x, w in zip(d.points, d.weights)]


def _problem_dict(p: ProblemReport) -> dict[str, Any]:
    out: dict[str, Any] = {"name": p.name, "status": p.status}
    if p.error is not None:
        out["error"] = p.error
    if p.status != "ok":
        return out
    out["bounds"] = p.bounds
    out["design"] = _design_dict(p.design)
    out["criterion_value"] = p.criterion_value
    out["iterations"] = p.iterations
    out["restart_index"] = p.restart_index
    out["get"] = {
        "passed": p.get_passed,
        "tolerance": GET_TOL,
        "max_violation": p.curve.max_violation,
        "support_residuals": [{"dose": x, "value": r} for x, r in p.curve.support_residuals],
        "curve": {"dose": p.curve.doses.tolist(), "value": p.curve.values.tolist()},
    }
    out["efficiency"] = None if p.efficiency is None else p.efficiency.as_dict()
    if p.relative is not None:
        out["relative"] = p.relative
        out["baseline_design"] = _design_dict(p.baseline_design)
    return out


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def sensitivity(problem: DesignProblem, design: DesignMeasure, curve_points: int = 2001) -> SensitivityCurve:
    """GET sensitivity curve of ``design`` over the problem's restricted space."""
    bounds = problem.admissible_doses if problem.discrete else problem.resolved_bounds
    if problem.criterion is Criterion.D:
        return sensitivity_d(design, problem.theta, bounds, curve_points)
    return sensitivity_c(design, problem.theta, problem.c, bounds, curve_points)


def _build(cfg: RunConfig, name: str, setup: DoseSetup) -> DesignProblem:
    return build_named(name, cfg.theta, setup.grid, setup.interval, cfg.gamma, setup.mined_definition)


def targets_block(cfg: RunConfig) -> dict[str, Any]:
    setup = cfg.setup
    t = target_doses(cfg.theta, cfg.gamma, setup.mined_definition)
    g = discrete_targets(cfg.theta, setup.grid, cfg.gamma, setup.mined_definition)
    x = setup.grid.doses
    return {
        "theta": cfg.theta.as_array().tolist(),
        "gamma": cfg.gamma,
        "continuous": {"mtd": t.mted, "obd": t.obd, "mined": t.mined, "window_empty": t.window_empty},
        "grid": {
            "doses": list(x),
            "mtd": {"index": g.mtd + 1, "dose": x[g.mtd]},
            "obd": {"index": g.obd + 1, "dose": x[g.obd]},
            "mined": {"index": g.mined + 1, "dose": x[g.mined]},
        },
    }


class _Solver:
    """Solves problems once each and remembers the designs."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.cache: dict[tuple[str, int], tuple[DesignProblem, Any]] = {}

    def get(self, name: str, setup: DoseSetup):
        key = (name, id(setup))
        if key not in self.cache:
            problem = _build(self.cfg, name, setup)
            logger.info("solving %s", name)
            self.cache[key] = (problem, solve(problem, self.cfg.pso))
        return self.cache[key]

    def design(self, name: str, setup: DoseSetup) -> DesignMeasure | None:
        try:
            return self.get(name, setup)[1].best_design
        except LordsError as exc:
            logger.warning("reference %s unavailable: %s", name, exc)
            return None


def _score(design, cfg, ref_d, ref_c, c, grid):
    if ref_d is None or ref_c is None:
        return None
    return efficiencies(design, cfg.theta, ref_d, ref_c, c, grid)


def run(cfg: RunConfig) -> RunReport:
    """Solve, verify and score every problem in ``cfg``."""
    solver = _Solver(cfg)
    setup = cfg.setup
    c = c_vector(cfg.theta)
    wants_grid = any(n.endswith("'") for n in cfg.problems) or cfg.rwr
    wants_interval = any(not n.endswith("'") for n in cfg.problems)

    refs: dict[bool, tuple[DesignMeasure | None, DesignMeasure | None]] = {}
    for discrete, wanted in ((False, wants_interval), (True, wants_grid)):
        if wanted:
            p = "'" if discrete else ""
            refs[discrete] = (solver.design(cfg.reference_d + p, setup),
                              solver.design(cfg.reference_c + p, setup))

    reports = []
    for name in cfg.problems:
        rep = ProblemReport(name=name)
        try:
            problem, result = solver.get(name, setup)
            design = result.best_design
            rep.bounds = list(problem.admissible_doses if problem.discrete else problem.resolved_bounds)
            rep.design = design
            rep.criterion_value = result.best_value
            rep.iterations = result.iterations_run
            rep.restart_index = result.restart_index
            rep.curve = sensitivity(problem, design, cfg.output.curve_points)
            grid = setup.grid if problem.discrete else None
            rep.efficiency = _score(design, cfg, *refs[problem.discrete], c, grid)
            if cfg.baseline is not None:
                base = solver.get(name, cfg.baseline)[1].best_design
                rep.baseline_design = base
                rep.relative = {
                    "d_eff": d_efficiency(design, base, cfg.theta),
                    "c_eff": c_efficiency(design, base, cfg.theta, c),
                }
        except LordsError as exc:
            rep = ProblemReport(name=name, status="error", error=f"{type(exc).__name__}: {exc}")
            logger.warning("problem %s failed: %s", name, exc)
        reports.append(rep)

    return RunReport(
        config=cfg,
        targets=targets_block(cfg),
        problems=reports,
        rwr=_rwr_block(cfg, refs.get(True), c) if cfg.rwr else None,
        provenance={
            "tool": "lords",
            "version": __version__,
            "seed": cfg.pso.seed,
            "config_hash": cfg.config_hash(),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        },
    )


def _rwr_block(cfg: RunConfig, refs, c) -> dict[str, Any]:
    try:
        full = rwr_stationary(cfg.theta, cfg.setup.grid, cfg.gamma)
    except LordsError as exc:
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
    design = drop_zero_weights(full)
    block: dict[str, Any] = {"status": "ok", "allocation": list(full.weights), "design": _design_dict(design)}
    try:
        eff = _score(design, cfg, *(refs or (None, None)), c, cfg.setup.grid)
        block["efficiency"] = None if eff is None else eff.as_dict()
    except LordsError as exc:
        block["efficiency"] = None
        block["error"] = f"{type(exc).__name__}: {exc}"
    return block


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header, rows) -> Path:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def report_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, allow_nan=False)


def export(report: RunReport, out_dir: str | os.PathLike | None = None, formats=None) -> list[Path]:
    """Write report artifacts and return their paths.

    JSON goes to ``report.json``.  CSV tables (headers fixed, see the
    ``*_COLUMNS`` constants) go to ``designs.csv``, ``efficiencies.csv``,
    ``sensitivity.csv``, ``radar.csv`` and ``targets.csv``.
    """
    out = Path(out_dir if out_dir is not None else report.config.output.dir)
    formats = tuple(formats or report.config.output.formats)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    written = []
    if "json" in formats:
        path = out / "report.json"
        try:
            path.write_text(report_json(report) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        written.append(path)
    if "csv" in formats:
        written += _export_csv(report, out)
    return written


def _export_csv(report: RunReport, out: Path) -> list[Path]:
    label = report.label
    ok = [p for p in report.problems if p.status == "ok"]
    designs = [
        (label, p.name, i + 1, x, w)
        for p in ok for i, (x, w) in enumerate(zip(p.design.points, p.design.weights))
    ]
    eff_rows, radar = [], []
    scored = [(p.name, p.efficiency, p.relative) for p in ok]
    if report.rwr and report.rwr.get("efficiency"):
        scored.append(("RWR", EfficiencyReport(**report.rwr["efficiency"]), None))
    for name, eff, rel in scored:
        if eff is None:
            continue
        rel = rel or {}
        eff_rows.append((label, name, eff.d_eff, eff.c_eff, eff.delta, eff.s, eff.score,
                         rel.get("d_eff", ""), rel.get("c_eff", "")))
        radar.append((label, name, eff.d_eff, eff.c_eff, eff.s))
    sens = [(label, p.name, x, v) for p in ok for x, v in zip(p.curve.doses.tolist(), p.curve.values.tolist())]
    t = report.targets
    targets = [(label, "interval", k, t["continuous"][k], "") for k in ("mined", "obd", "mtd")]
    targets += [(label, "grid", k, t["grid"][k]["dose"], t["grid"][k]["index"]) for k in ("mined", "obd", "mtd")]
    return [
        _write_csv(out / "designs.csv", DESIGN_COLUMNS, designs),
        _write_csv(out / "efficiencies.csv", EFFICIENCY_COLUMNS, eff_rows),
        _write_csv(out / "sensitivity.csv", SENSITIVITY_COLUMNS, sens),
        _write_csv(out / "radar.csv", RADAR_COLUMNS, radar),
        _write_csv(out / "targets.csv", TARGET_COLUMNS, targets),
    ]
