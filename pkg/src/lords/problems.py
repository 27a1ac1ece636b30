"""Restricted optimal design problems.

A problem binds a criterion (D or c), an ethical restriction (cap at the
MTD, or stay inside the therapeutic window) and a dose space.  Restrictions
are resolved once, at the local parameter value, into fixed bounds on an
interval or an admissible subset of a grid.

The eight problems of the standard workflow are named ``I``..``IV`` on the
interval and ``I'``..``IV'`` on the grid::

    I / I'     D-criterion, doses up to the MTD
    II / II'   D-criterion, doses in [MinED, MTD]
    III / III' c-criterion for the OBD, doses up to the MTD
    IV / IV'   c-criterion for the OBD, doses in [MinED, MTD]
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import NDArray

from lords.cr_model import (
    ContinuousInterval,
    DiscreteGrid,
    DiscreteTargets,
    DoseSpace,
    MinEdDefinition,
    NeutralProbability,
    TargetDoses,
    ThetaParams,
    discrete_targets,
    target_doses,
)
from lords.errors import EmptyWindowError
from lords.information import (
    c_criterion_fim,
    c_vector,
    d_criterion_fim,
    design_fim_batch,
)
from lords.pso import ContinuousEncoding, DiscreteEncoding, PsoConfig, PsoResult, optimize


class Criterion(str, enum.Enum):
    D = "D"
    C = "c"


class Restriction(str, enum.Enum):
    MTD_CAP = "mtd_cap"
    THERAPEUTIC_WINDOW = "therapeutic_window"


_NAMED = {
    "I": (Criterion.D, Restriction.MTD_CAP),
    "II": (Criterion.D, Restriction.THERAPEUTIC_WINDOW),
    "III": (Criterion.C, Restriction.MTD_CAP),
    "IV": (Criterion.C, Restriction.THERAPEUTIC_WINDOW),
}


def parse_problem_name(name: str) -> tuple[Criterion, Restriction, bool]:
    """``"III'"`` -> ``(Criterion.C, Restriction.MTD_CAP, True)``.

    The trailing prime (``'`` or ``p``) selects the discrete dose grid.
    """
    key = name.strip()
    discrete = key.endswith("'") or key.endswith("p")
    base = key.rstrip("'p")
    if base not in _NAMED:
        raise KeyError(f"unknown problem name {name!r}")
    crit, restr = _NAMED[base]
    return crit, restr, discrete


def problem_name(criterion: Criterion, restriction: Restriction, discrete: bool) -> str:
    for k, v in _NAMED.items():
        if v == (criterion, restriction):
            return k + ("'" if discrete else "")
    raise KeyError((criterion, restriction))


@dataclass(frozen=True)
class DesignProblem:
    criterion: Criterion
    restriction: Restriction
    space: DoseSpace
    theta: ThetaParams
    gamma: float
    mined_definition: MinEdDefinition
    targets: TargetDoses
    grid_targets: DiscreteTargets | None
    # interval (lower, upper) or sorted admissible grid indices
    resolved_bounds: Union[tuple[float, float], tuple[int, ...]]
    c: NDArray[np.float64] | None = field(default=None, compare=False)

    @property
    def discrete(self) -> bool:
        return isinstance(self.space, DiscreteGrid)

    @property
    def name(self) -> str:
        return problem_name(self.criterion, self.restriction, self.discrete)

    @property
    def admissible_doses(self) -> tuple[float, ...]:
        if not self.discrete:
            raise TypeError("admissible doses only exist on a grid")
        return tuple(self.space.doses[i] for i in self.resolved_bounds)

    def batch_objective(self, points: NDArray[np.float64], weights: NDArray[np.float64]):
        m = design_fim_batch(points, weights, self.theta)
        if self.criterion is Criterion.D:
            return d_criterion_fim(m)
        return c_criterion_fim(m, self.c)

    def contains(self, dose: float, atol: float = 1e-9) -> bool:
        if self.discrete:
            adm = np.asarray(self.admissible_doses)
            return bool(np.any(np.abs(adm - dose) <= atol))
        lo, hi = self.resolved_bounds
        return lo - atol <= dose <= hi + atol


def build_problem(
    criterion: Criterion,
    restriction: Restriction,
    space: DoseSpace,
    theta: ThetaParams,
    gamma: float = 0.2,
    mined_definition: MinEdDefinition = NeutralProbability(),
) -> DesignProblem:
    criterion = Criterion(criterion)
    restriction = Restriction(restriction)
    targets = target_doses(theta, gamma, mined_definition)
    window = restriction is Restriction.THERAPEUTIC_WINDOW

    if isinstance(space, DiscreteGrid):
        gt = discrete_targets(theta, space, gamma, mined_definition)
        lo_i = gt.mined if window else 0
        bounds = tuple(range(lo_i, gt.mtd + 1))
        if not bounds:
            raise EmptyWindowError(
                f"no grid dose between MinED' (x{gt.mined + 1}) and MTD' (x{gt.mtd + 1})",
                targets=gt,
            )
    else:
        gt = None
        upper = min(space.upper, targets.mted)
        lower = max(space.lower, targets.mined) if window else space.lower
        if not lower < upper:
            raise EmptyWindowError(
                f"restricted interval [{lower:.4g}, {upper:.4g}] is empty", targets=targets
            )
        bounds = (float(lower), float(upper))

    c = c_vector(theta) if criterion is Criterion.C else None
    return DesignProblem(
        criterion=criterion,
        restriction=restriction,
        space=space,
        theta=theta,
        gamma=gamma,
        mined_definition=mined_definition,
        targets=targets,
        grid_targets=gt,
        resolved_bounds=bounds,
        c=c,
    )


def build_named(
    name: str,
    theta: ThetaParams,
    grid: DiscreteGrid,
    interval: ContinuousInterval | None = None,
    gamma: float = 0.2,
    mined_definition: MinEdDefinition = NeutralProbability(),
) -> DesignProblem:
    crit, restr, discrete = parse_problem_name(name)
    space = grid if discrete else (interval or grid.interval())
    return build_problem(crit, restr, space, theta, gamma, mined_definition)


def encoding_for(problem: DesignProblem, cfg: PsoConfig):
    if problem.discrete:
        return DiscreteEncoding(problem.admissible_doses)
    lo, hi = problem.resolved_bounds
    return ContinuousEncoding(cfg.n_support, lo, hi)


def solve(problem: DesignProblem, cfg: PsoConfig = PsoConfig()) -> PsoResult:
    result = optimize(problem.batch_objective, encoding_for(problem, cfg), cfg)
    outside = [x for x in result.best_design.points if not problem.contains(x)]
    if outside:
        # cleanup averages in-bound points, so this only trips on a bug
        raise AssertionError(f"support points {outside} outside {problem.resolved_bounds}")
    return result
