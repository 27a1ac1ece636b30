"""Optimality checks and design comparison metrics.

Sensitivity functions follow the usual equivalence-theorem forms.  For the
D-criterion ``phi(d) = tr(M^-1 mu(d)) - 4``; for the c-criterion
``phi(d) = c^T M^-1 mu(d) M^-1 c / c^T M^-1 c - 1``.  A design is optimal on
its restricted dose set when ``phi <= 0`` there, with equality at the
support points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from lords.cr_model import (
    DiscreteGrid,
    ThetaParams,
    discrete_targets,
    obd,
    outcome_probabilities,
)
from lords.errors import DomainError, NoSafeDoseError, SingularDesignError
from lords.information import (
    N_PARAMS,
    DesignMeasure,
    c_criterion_fim,
    d_criterion_fim,
    design_fim,
    mu_many,
    solve_fim,
)

GET_TOL = 1e-3
CURVE_POINTS = 2001


@dataclass
class SensitivityCurve:
    doses: NDArray[np.float64]
    values: NDArray[np.float64]
    max_violation: float
    support_residuals: list[tuple[float, float]]

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.doses.tolist(), self.values.tolist()))

    def passed(self, tol: float = GET_TOL) -> bool:
        return self.max_violation <= tol and all(abs(r) <= tol for _, r in self.support_residuals)


def _sample_doses(bounds, n_points: int) -> NDArray[np.float64]:
    """Evaluation doses: a uniform grid over an interval, or the given doses."""
    if isinstance(bounds, DiscreteGrid):
        return bounds.array
    if isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], (list, tuple)):
        lo, hi = float(bounds[0]), float(bounds[1])
        if not lo < hi:
            raise DomainError(f"empty interval {bounds}")
        return np.linspace(lo, hi, n_points)
    doses = np.asarray(bounds, dtype=float).ravel()
    return np.sort(doses)


def _checked_fim(design: DesignMeasure, theta: ThetaParams, label: str = "design"):
    m = design_fim(design, theta)
    if not np.isfinite(d_criterion_fim(m)):
        raise SingularDesignError(f"{label} has a singular information matrix")
    return m


def _curve(phi, design, doses) -> SensitivityCurve:
    values = phi(doses)
    residuals = [(float(x), float(r)) for x, r in zip(design.points, phi(design.point_array))]
    return SensitivityCurve(
        doses=doses,
        values=values,
        max_violation=float(np.max(values)),
        support_residuals=residuals,
    )


def sensitivity_d(design: DesignMeasure, theta: ThetaParams, bounds, n_points: int = CURVE_POINTS) -> SensitivityCurve:
    """D-criterion sensitivity over ``bounds``.

    ``bounds`` is an ``(lower, upper)`` interval sampled at ``n_points``, or
    an explicit sequence of doses (e.g. the admissible grid doses).
    """
    m = _checked_fim(design, theta)
    m_inv = np.linalg.inv(m)
    m_inv = 0.5 * (m_inv + m_inv.T)

    def phi(x):
        return np.einsum("jk,...kj->...", m_inv, mu_many(x, theta)) - N_PARAMS

    return _curve(phi, design, _sample_doses(bounds, n_points))


def sensitivity_c(
    design: DesignMeasure, theta: ThetaParams, c: ArrayLike, bounds, n_points: int = CURVE_POINTS
) -> SensitivityCurve:
    """c-criterion sensitivity; invariant to rescaling ``c``."""
    m = _checked_fim(design, theta)
    u = solve_fim(m, c)
    variance = float(np.dot(c, u))
    if not variance > 0:
        raise DomainError("c must be a nonzero vector")

    def phi(x):
        return np.einsum("j,...jk,k->...", u, mu_many(x, theta), u) / variance - 1.0

    return _curve(phi, design, _sample_doses(bounds, n_points))


# ---------------------------------------------------------------------------
# Efficiencies
# ---------------------------------------------------------------------------

def d_efficiency(design: DesignMeasure, reference: DesignMeasure, theta: ThetaParams) -> float:
    """``(|M(design)| / |M(reference)|)^(1/4)``."""
    dv = d_criterion_fim(_checked_fim(design, theta))
    dr = d_criterion_fim(_checked_fim(reference, theta, "reference design"))
    return math.exp((dr - dv) / N_PARAMS)


def c_efficiency(design: DesignMeasure, reference: DesignMeasure, theta: ThetaParams, c: ArrayLike) -> float:
    """``c^T M(reference)^-1 c / c^T M(design)^-1 c``."""
    cv = c_criterion_fim(_checked_fim(design, theta), c)
    cr = c_criterion_fim(_checked_fim(reference, theta, "reference design"), c)
    return cr / cv


def tradeoff_distance(d_eff: float, c_eff: float) -> float:
    """Euclidean distance of ``(d_eff, c_eff)`` from the ideal ``(1, 1)``."""
    return math.hypot(1.0 - d_eff, 1.0 - c_eff)


def score(d_eff: float, c_eff: float, s: float) -> float:
    return math.sqrt((d_eff * c_eff + d_eff * s + c_eff * s) / 3.0)


def success_proportion(design: DesignMeasure, theta: ThetaParams, grid: DiscreteGrid | None = None) -> float:
    """Expected success rate relative to dosing everyone at the best dose.

    The best dose is the grid OBD' when ``grid`` is given, otherwise the
    continuous OBD.
    """
    pi1 = outcome_probabilities(design.point_array, theta)[1]
    if grid is None:
        best = float(outcome_probabilities(obd(theta), theta)[1])
    else:
        i = discrete_targets(theta, grid).obd
        best = float(outcome_probabilities(grid.doses[i], theta)[1])
    return float(np.dot(design.weight_array, pi1)) / best


@dataclass
class EfficiencyReport:
    d_eff: float
    c_eff: float
    delta: float
    s: float
    score: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("d_eff", "c_eff", "delta", "s", "score")}


def efficiencies(
    design: DesignMeasure,
    theta: ThetaParams,
    ref_d: DesignMeasure,
    ref_c: DesignMeasure,
    c: ArrayLike,
    grid: DiscreteGrid | None = None,
) -> EfficiencyReport:
    de = d_efficiency(design, ref_d, theta)
    ce = c_efficiency(design, ref_c, theta, c)
    s = success_proportion(design, theta, grid)
    return EfficiencyReport(d_eff=de, c_eff=ce, delta=tradeoff_distance(de, ce), s=s, score=score(de, ce, s))


# ---------------------------------------------------------------------------
# Random walk rule
# ---------------------------------------------------------------------------

def rwr_stationary(theta: ThetaParams, grid: DiscreteGrid, gamma: float = 0.2) -> DesignMeasure:
    """Long-run allocation of the random walk rule targeting the safe OBD.

    Returned over the full grid; doses above the highest safe dose get zero
    weight.
    """
    x = grid.array
    pi0, _, pi2 = outcome_probabilities(x, theta)
    safe = np.flatnonzero(pi2 <= gamma)
    if safe.size == 0 or safe[0] != 0:
        raise NoSafeDoseError(f"toxicity at the lowest dose exceeds {gamma}")
    ell = int(safe[-1]) + 1
    # unnormalized Pi_k = prod_{j=2..k} lambda_j, lambda_j = pi0(x_{j-1}) / pi2(x_j)
    ratios = pi0[: ell - 1] / pi2[1:ell]
    unnorm = np.concatenate(([1.0], np.cumprod(ratios)))
    weights = np.zeros(len(x))
    weights[:ell] = unnorm / unnorm.sum()
    return DesignMeasure(tuple(x), tuple(weights))


def drop_zero_weights(design: DesignMeasure) -> DesignMeasure:
    keep = design.weight_array > 0
    return DesignMeasure.normalized(design.point_array[keep], design.weight_array[keep])
