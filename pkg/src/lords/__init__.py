"""Locally optimal restricted designs for phase I/II dose finding.

The continuation-ratio model links a log-dose to three outcomes (neutral,
success, toxicity).  This package finds D- and c-optimal designs whose
support respects ethical dose bounds, verifies them with the equivalence
theorem and compares them on statistical and ethical metrics.
"""

__version__ = "0.1.0"

from lords.cr_model import (  # noqa: E402
    ConditionalEfficacy,
    ContinuousInterval,
    DiscreteGrid,
    NeutralProbability,
    ThetaParams,
    discrete_targets,
    mined,
    mtd,
    obd,
    outcome_probabilities,
    target_doses,
)
from lords.evaluation import (  # noqa: E402
    c_efficiency,
    d_efficiency,
    efficiencies,
    rwr_stationary,
    score,
    sensitivity_c,
    sensitivity_d,
    success_proportion,
)
from lords.information import DesignMeasure, c_vector, design_fim  # noqa: E402
from lords.problems import Criterion, Restriction, build_named, build_problem, solve  # noqa: E402
from lords.pso import PsoConfig  # noqa: E402
from lords.scenarios import DEFAULT_GRID, SCENARIOS, scenario  # noqa: E402

__all__ = [
    "ConditionalEfficacy", "ContinuousInterval", "DEFAULT_GRID", "Criterion", "DesignMeasure",
    "DiscreteGrid", "NeutralProbability", "PsoConfig", "Restriction", "SCENARIOS", "ThetaParams",
    "build_named", "build_problem", "c_efficiency", "c_vector", "d_efficiency", "design_fim",
    "discrete_targets", "efficiencies", "mined", "mtd", "obd", "outcome_probabilities",
    "rwr_stationary", "scenario", "score", "sensitivity_c", "sensitivity_d", "solve",
    "success_proportion", "target_doses",
]
