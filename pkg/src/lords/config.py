"""Run configuration: YAML ingestion, validation and round-trip writing.

A configuration names a local parameter value (a preset scenario or an
explicit ``theta``), a dose space, the ethical thresholds and a list of
problems.  Example::

    scenario: A
    doses:
      grid: [-1.20, -0.23, 0.92, 2.02, 3.00, 3.69, 4.38, 5.08, 5.77]
      scale: log            # or raw: values are mg and get log-transformed
    gamma: 0.2
    mined: {definition: neutral, delta: 0.2}
    problems: all           # or a list such as [I, "III'"]
    references: {d: I, c: III}
    pso: {seed: 7, restarts: 10}
    rwr: true
    output: {dir: results, formats: [json, csv]}

An optional ``baseline`` block holding its own ``doses`` and ``mined`` keys
makes every problem be solved a second time under that setup; the report
then carries efficiencies of each design relative to its baseline twin.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from lords.cr_model import (
    ConditionalEfficacy,
    ContinuousInterval,
    DiscreteGrid,
    MinEdDefinition,
    NeutralProbability,
    ThetaParams,
)
from lords.errors import ConfigError, LordsError
from lords.pso import InertiaSchedule, PsoConfig
from lords.problems import parse_problem_name
from lords.scenarios import DEFAULT_GAMMA, DEFAULT_GRID, SCENARIOS

SEED_ENV = "LORDS_SEED"
ALL_PROBLEMS = ("I", "II", "III", "IV", "I'", "II'", "III'", "IV'")
FORMATS = ("json", "csv")

_TOP_KEYS = {"name", "scenario", "theta", "doses", "gamma", "mined", "problems",
             "references", "baseline", "pso", "rwr", "output"}
_DOSE_KEYS = {"grid", "append", "select", "interval", "scale"}
_MINED_KEYS = {"definition", "delta", "level"}
_BASELINE_KEYS = {"doses", "mined"}
_REF_KEYS = {"d", "c"}
_OUTPUT_KEYS = {"dir", "formats", "curve_points"}
_INERTIA_KEYS = {"w_start", "w_end", "gamma"}
_PSO_KEYS = {"swarm_size", "max_iters", "c1", "c2", "inertia", "seed", "restarts",
             "stall_iters", "rel_tol", "n_support", "merge_tol", "min_weight", "polish"}


@dataclass(frozen=True)
class DoseSetup:
    """Dose grid, continuous interval and MinED definition."""

    grid: DiscreteGrid = DEFAULT_GRID
    interval: ContinuousInterval = field(default_factory=DEFAULT_GRID.interval)
    mined_definition: MinEdDefinition = NeutralProbability()


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "results"
    formats: tuple[str, ...] = FORMATS
    curve_points: int = 2001


@dataclass(frozen=True)
class RunConfig:
    theta: ThetaParams
    setup: DoseSetup = DoseSetup()
    gamma: float = DEFAULT_GAMMA
    problems: tuple[str, ...] = ALL_PROBLEMS
    reference_d: str = "I"
    reference_c: str = "III"
    baseline: DoseSetup | None = None
    pso: PsoConfig = field(default_factory=PsoConfig)
    rwr: bool = True
    output: OutputSettings = OutputSettings()
    name: str = "run"
    scenario: str | None = None

    def config_hash(self) -> str:
        text = yaml.safe_dump(config_to_dict(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def default_seed() -> int:
    """Seed from ``LORDS_SEED`` if set, else the built-in default."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return PsoConfig().seed
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def _check_keys(block: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(block).__name__}")
    unknown = sorted(set(map(str, block)) - allowed)
    if unknown:
        paths = [f"{where}.{k}" if where else k for k in unknown]
        raise ConfigError(f"unknown key(s): {', '.join(paths)}; allowed under {where or 'top level'}: "
                          f"{', '.join(sorted(allowed))}")
    return block


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def _numbers(value: Any, where: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a non-empty list of numbers")
    return [_number(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _parse_doses(block: Any, where: str) -> tuple[DiscreteGrid, ContinuousInterval]:
    block = _check_keys(block or {}, _DOSE_KEYS, where)
    scale = block.get("scale", "log")
    if scale not in ("log", "raw"):
        raise ConfigError(f"{where}.scale: must be 'log' or 'raw', got {scale!r}")

    def to_log(vals: list[float], key: str) -> list[float]:
        if scale == "log":
            return vals
        if any(v <= 0 for v in vals):
            raise ConfigError(f"{where}.{key}: raw doses must be positive")
        return [math.log(v) for v in vals]

    doses = list(DEFAULT_GRID.doses)
    if "grid" in block:
        doses = to_log(_numbers(block["grid"], f"{where}.grid"), "grid")
    if "select" in block:
        sel = block["select"]
        if not isinstance(sel, list) or not sel or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in sel
        ):
            raise ConfigError(f"{where}.select: expected a list of 1-based dose indices")
        if any(not 1 <= i <= len(doses) for i in sel):
            raise ConfigError(f"{where}.select: index out of range 1..{len(doses)}")
        doses = [doses[i - 1] for i in sorted(set(sel))]
    if "append" in block:
        doses = doses + to_log(_numbers(block["append"], f"{where}.append"), "append")
    try:
        grid = DiscreteGrid(tuple(doses))
    except LordsError as exc:
        raise ConfigError(f"{where}.grid: {exc}") from None

    if "interval" in block:
        iv = to_log(_numbers(block["interval"], f"{where}.interval"), "interval")
        if len(iv) != 2:
            raise ConfigError(f"{where}.interval: expected [lower, upper]")
        try:
            interval = ContinuousInterval(iv[0], iv[1])
        except LordsError as exc:
            raise ConfigError(f"{where}.interval: {exc}") from None
    else:
        interval = grid.interval()
    return grid, interval


def _parse_mined(block: Any, where: str) -> MinEdDefinition:
    if block is None:
        return NeutralProbability()
    block = _check_keys(block, _MINED_KEYS, where)
    kind = block.get("definition", "neutral")
    try:
        if kind == "neutral":
            if "level" in block:
                raise ConfigError(f"{where}.level: only valid with conditional_efficacy")
            return NeutralProbability(_number(block.get("delta", 0.2), f"{where}.delta"))
        if kind == "conditional_efficacy":
            if "delta" in block:
                raise ConfigError(f"{where}.delta: only valid with neutral")
            return ConditionalEfficacy(_number(block.get("level", 0.6), f"{where}.level"))
    except ConfigError:
        raise
    except LordsError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.definition: must be 'neutral' or 'conditional_efficacy', got {kind!r}")


def _parse_setup(block: dict, where: str) -> DoseSetup:
    grid, interval = _parse_doses(block.get("doses"), f"{where}doses")
    return DoseSetup(grid, interval, _parse_mined(block.get("mined"), f"{where}mined"))


def _parse_problems(value: Any) -> tuple[str, ...]:
    if value is None or value == "all":
        return ALL_PROBLEMS
    if not isinstance(value, list):
        raise ConfigError("problems: expected 'all' or a list of problem names")
    names = []
    for i, v in enumerate(value):
        try:
            crit, restr, discrete = parse_problem_name(str(v))
        except KeyError:
            raise ConfigError(f"problems[{i}]: unknown problem {v!r}") from None
        name = str(v).strip().rstrip("'p") + ("'" if discrete else "")
        if name in names:
            raise ConfigError(f"problems[{i}]: duplicate problem {name!r}")
        names.append(name)
    return tuple(names)


def _parse_pso(block: Any) -> PsoConfig:
    block = _check_keys(block or {}, _PSO_KEYS, "pso")
    kwargs: dict[str, Any] = {}
    for key, value in block.items():
        if key == "inertia":
            _check_keys(value, _INERTIA_KEYS, "pso.inertia")
            kwargs[key] = InertiaSchedule(**{k: _number(v, f"pso.inertia.{k}") for k, v in value.items()})
        elif key == "polish":
            if not isinstance(value, bool):
                raise ConfigError("pso.polish: expected true or false")
            kwargs[key] = value
        elif key in ("swarm_size", "max_iters", "seed", "restarts", "stall_iters", "n_support"):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"pso.{key}: expected an integer, got {value!r}")
            kwargs[key] = value
        else:
            kwargs[key] = _number(value, f"pso.{key}")
    kwargs.setdefault("seed", default_seed())
    try:
        return PsoConfig(**kwargs)
    except LordsError as exc:
        raise ConfigError(f"pso: {exc}") from None


def _parse_output(block: Any) -> OutputSettings:
    block = _check_keys(block or {}, _OUTPUT_KEYS, "output")
    formats = block.get("formats", list(FORMATS))
    if isinstance(formats, str):
        formats = [formats]
    if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
        raise ConfigError(f"output.formats: choose from {list(FORMATS)}, got {formats!r}")
    points = block.get("curve_points", 2001)
    if isinstance(points, bool) or not isinstance(points, int) or points < 2:
        raise ConfigError("output.curve_points: expected an integer >= 2")
    return OutputSettings(str(block.get("dir", "results")), tuple(formats), points)


def _parse_reference(block: Any) -> tuple[str, str]:
    block = _check_keys(block or {}, _REF_KEYS, "references")
    out = []
    for key, default in (("d", "I"), ("c", "III")):
        name = str(block.get(key, default)).strip()
        if name not in ("I", "II", "III", "IV"):
            raise ConfigError(f"references.{key}: expected one of I, II, III, IV (primes are implied by the dose space)")
        out.append(name)
    return out[0], out[1]


def parse_config(data: Any) -> RunConfig:
    """Validate a decoded configuration mapping."""
    data = _check_keys(data if data is not None else {}, _TOP_KEYS, "config")
    scenario = data.get("scenario")
    if scenario is not None and "theta" in data:
        raise ConfigError("config: give either scenario or theta, not both")
    if "theta" in data:
        vals = _numbers(data["theta"], "theta")
        try:
            theta = ThetaParams.from_sequence(vals)
        except LordsError as exc:
            raise ConfigError(f"theta: {exc}") from None
    elif scenario is not None:
        key = str(scenario).upper()
        if key not in SCENARIOS:
            raise ConfigError(f"scenario: unknown preset {scenario!r}; choose from {sorted(SCENARIOS)}")
        scenario, theta = key, SCENARIOS[key]
    else:
        raise ConfigError("config: one of scenario or theta is required")

    gamma = _number(data.get("gamma", DEFAULT_GAMMA), "gamma")
    if not 0 < gamma < 1:
        raise ConfigError("gamma: must lie in (0, 1)")
    rwr = data.get("rwr", True)
    if not isinstance(rwr, bool):
        raise ConfigError("rwr: expected true or false")
    baseline = None
    if data.get("baseline") is not None:
        baseline = _parse_setup(_check_keys(data["baseline"], _BASELINE_KEYS, "baseline"), "baseline.")
    ref_d, ref_c = _parse_reference(data.get("references"))
    return RunConfig(
        theta=theta,
        setup=_parse_setup(data, ""),
        gamma=gamma,
        problems=_parse_problems(data.get("problems")),
        reference_d=ref_d,
        reference_c=ref_c,
        baseline=baseline,
        pso=_parse_pso(data.get("pso")),
        rwr=rwr,
        output=_parse_output(data.get("output")),
        name=str(data.get("name", scenario or "run")),
        scenario=scenario,
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read and validate a YAML run configuration.

    Raises
    ------
    ConfigError
        On I/O failure, malformed YAML (with line and column) or an invalid
        field (named by its dotted path).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    return loads_config(text, source=str(path))


def loads_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{where}: parse error: {problem}") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------

def _mined_to_dict(m: MinEdDefinition) -> dict:
    if isinstance(m, ConditionalEfficacy):
        return {"definition": "conditional_efficacy", "level": m.level}
    return {"definition": "neutral", "delta": m.delta}


def _setup_to_dict(s: DoseSetup) -> dict:
    return {
        "doses": {
            "grid": list(s.grid.doses),
            "interval": [s.interval.lower, s.interval.upper],
            "scale": "log",
        },
        "mined": _mined_to_dict(s.mined_definition),
    }


def config_to_dict(cfg: RunConfig) -> dict:
    """Fully resolved mapping; parsing it gives back ``cfg``."""
    out: dict[str, Any] = {"name": cfg.name}
    if cfg.scenario is not None and SCENARIOS.get(cfg.scenario) == cfg.theta:
        out["scenario"] = cfg.scenario
    else:
        out["theta"] = list(cfg.theta.as_array().tolist())
    out.update(_setup_to_dict(cfg.setup))
    out["gamma"] = cfg.gamma
    out["problems"] = list(cfg.problems)
    out["references"] = {"d": cfg.reference_d, "c": cfg.reference_c}
    if cfg.baseline is not None:
        out["baseline"] = _setup_to_dict(cfg.baseline)
    out["pso"] = asdict(cfg.pso)
    out["rwr"] = cfg.rwr
    out["output"] = {
        "dir": cfg.output.dir,
        "formats": list(cfg.output.formats),
        "curve_points": cfg.output.curve_points,
    }
    return out


def dumps_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def write_config(cfg: RunConfig, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text(dumps_config(cfg))
    return path
