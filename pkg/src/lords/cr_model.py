"""Continuation-ratio dose-response model and its target doses.

Doses are on the log scale throughout.  The model combines a toxicity
logistic ``p_T(d) = expit(theta3 + theta4 d)`` with a logistic for efficacy
given no toxicity ``p_E|T(d) = expit(theta1 + theta2 d)``, giving the
trinomial outcome probabilities

    pi0 = (1 - p_E|T)(1 - p_T)      neutral
    pi1 = p_E|T (1 - p_T)           success
    pi2 = p_T                       toxicity
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq
from scipy.special import expit, logit

from lords.errors import DomainError, SolverError

_BRACKET = 50.0
_MAX_BRACKET = 1e6
_XTOL = 1e-13


@dataclass(frozen=True)
class ThetaParams:
    """The four CR model parameters.

    ``theta1``/``theta2`` are intercept and slope of the conditional
    efficacy logistic, ``theta3``/``theta4`` those of the toxicity logistic.
    """

    theta1: float
    theta2: float
    theta3: float
    theta4: float

    def __post_init__(self) -> None:
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"theta must be finite, got {tuple(vals)}")
        if not self.theta1 >= self.theta3:
            raise DomainError("theta1 must be >= theta3")
        if not self.theta3 < 0:
            raise DomainError("theta3 must be negative")
        if not (self.theta2 > 0 and self.theta4 > 0):
            raise DomainError("theta2 and theta4 must be positive")

    @classmethod
    def from_sequence(cls, values: ArrayLike) -> ThetaParams:
        t = [float(v) for v in np.asarray(values, dtype=float).ravel()]
        if len(t) != 4:
            raise DomainError(f"theta needs 4 values, got {len(t)}")
        return cls(*t)

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.theta1, self.theta2, self.theta3, self.theta4], dtype=float)


@dataclass(frozen=True)
class ContinuousInterval:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise DomainError("interval bounds must be finite")
        if not self.lower < self.upper:
            raise DomainError(f"empty interval [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class DiscreteGrid:
    doses: tuple[float, ...]

    def __post_init__(self) -> None:
        x = np.asarray(self.doses, dtype=float)
        object.__setattr__(self, "doses", tuple(float(v) for v in x))
        if x.ndim != 1 or x.size < 2:
            raise DomainError("a dose grid needs at least two doses")
        if not np.all(np.isfinite(x)):
            raise DomainError("grid doses must be finite")
        if not np.all(np.diff(x) > 0):
            raise DomainError("grid doses must be strictly increasing")

    def __len__(self) -> int:
        return len(self.doses)

    @property
    def array(self) -> NDArray[np.float64]:
        return np.asarray(self.doses, dtype=float)

    def interval(self) -> ContinuousInterval:
        return ContinuousInterval(self.doses[0], self.doses[-1])


DoseSpace = Union[ContinuousInterval, DiscreteGrid]


@dataclass(frozen=True)
class NeutralProbability:
    """MinED is where the neutral-outcome probability equals ``delta``."""

    delta: float = 0.2

    def __post_init__(self) -> None:
        _check_probability(self.delta, "delta")


@dataclass(frozen=True)
class ConditionalEfficacy:
    """MinED is where efficacy given no toxicity reaches ``level``."""

    level: float = 0.6

    def __post_init__(self) -> None:
        _check_probability(self.level, "level")


MinEdDefinition = Union[NeutralProbability, ConditionalEfficacy]


@dataclass(frozen=True)
class TargetDoses:
    mted: float
    obd: float
    mined: float

    @property
    def therapeutic_window(self) -> tuple[float, float]:
        return (self.mined, self.mted)

    @property
    def window_empty(self) -> bool:
        return self.mined > self.mted


@dataclass(frozen=True)
class DiscreteTargets:
    """Zero-based grid indices of the discrete target doses."""

    mtd: int
    obd: int
    mined: int


def _check_probability(p: float, name: str) -> None:
    if not (isinstance(p, (int, float)) and 0.0 < p < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {p!r}")


def _as_dose(d: ArrayLike) -> NDArray[np.float64]:
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)):
        raise DomainError("dose must be finite")
    return d


def efficacy_given_no_toxicity(d: ArrayLike, theta: ThetaParams) -> NDArray[np.float64]:
    d = _as_dose(d)
    return expit(theta.theta1 + theta.theta2 * d)


def toxicity(d: ArrayLike, theta: ThetaParams) -> NDArray[np.float64]:
    d = _as_dose(d)
    return expit(theta.theta3 + theta.theta4 * d)


def outcome_probabilities(d: ArrayLike, theta: ThetaParams):
    """Return ``(pi0, pi1, pi2)`` at dose(s) ``d``.

    Works elementwise on arrays.  The complements are taken from the
    mirrored logistic rather than ``1 - p`` so tails keep full precision.
    """
    d = _as_dose(d)
    eta_e = theta.theta1 + theta.theta2 * d
    eta_t = theta.theta3 + theta.theta4 * d
    no_tox = expit(-eta_t)
    pi0 = expit(-eta_e) * no_tox
    pi1 = expit(eta_e) * no_tox
    pi2 = expit(eta_t)
    return pi0, pi1, pi2


def mtd(theta: ThetaParams, gamma: float) -> float:
    """Log-dose at which the toxicity probability equals ``gamma``."""
    _check_probability(gamma, "gamma")
    return float((logit(gamma) - theta.theta3) / theta.theta4)


def obd_residual(d: ArrayLike, theta: ThetaParams) -> NDArray[np.float64]:
    """Derivative of ``log pi1`` times -1: ``theta4 p_T - theta2 (1 - p_E|T)``.

    Strictly increasing in ``d``, so its single root is the OBD.
    """
    d = _as_dose(d)
    p_t = expit(theta.theta3 + theta.theta4 * d)
    q_e = expit(-(theta.theta1 + theta.theta2 * d))
    return theta.theta4 * p_t - theta.theta2 * q_e


def _increasing_root(f, lo: float = -_BRACKET, hi: float = _BRACKET) -> float:
    # f is increasing; widen geometrically until it changes sign
    while f(lo) > 0:
        lo *= 2.0
        if abs(lo) > _MAX_BRACKET:
            raise SolverError("could not bracket root from below")
    while f(hi) < 0:
        hi *= 2.0
        if abs(hi) > _MAX_BRACKET:
            raise SolverError("could not bracket root from above")
    return brentq(f, lo, hi, xtol=_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def obd(theta: ThetaParams) -> float:
    """Log-dose maximizing the success probability pi1."""
    return _increasing_root(lambda d: float(obd_residual(d, theta)))


def mined(theta: ThetaParams, definition: MinEdDefinition = NeutralProbability()) -> float:
    if isinstance(definition, ConditionalEfficacy):
        return float((logit(definition.level) - theta.theta1) / theta.theta2)
    if isinstance(definition, NeutralProbability):
        delta = definition.delta

        # pi0 decreases in d, so delta - pi0 increases
        def f(d: float) -> float:
            return delta - float(outcome_probabilities(d, theta)[0])

        return _increasing_root(f)
    raise DomainError(f"unknown MinED definition {definition!r}")


def target_doses(
    theta: ThetaParams, gamma: float = 0.2, definition: MinEdDefinition = NeutralProbability()
) -> TargetDoses:
    return TargetDoses(mted=mtd(theta, gamma), obd=obd(theta), mined=mined(theta, definition))


def _argmin_lowest(values: NDArray[np.float64]) -> int:
    # np.argmin returns the first (lowest-dose) index among exact ties
    return int(np.argmin(values))


def discrete_targets(
    theta: ThetaParams,
    grid: DiscreteGrid,
    gamma: float = 0.2,
    definition: MinEdDefinition = NeutralProbability(),
) -> DiscreteTargets:
    _check_probability(gamma, "gamma")
    x = grid.array
    pi0, pi1, pi2 = outcome_probabilities(x, theta)
    mtd_i = _argmin_lowest(np.abs(pi2 - gamma))
    obd_i = _argmin_lowest(-pi1)
    if isinstance(definition, ConditionalEfficacy):
        mined_i = _argmin_lowest(np.abs(efficacy_given_no_toxicity(x, theta) - definition.level))
    else:
        mined_i = _argmin_lowest(np.abs(pi0 - definition.delta))
    return DiscreteTargets(mtd=mtd_i, obd=obd_i, mined=mined_i)
