"""Fisher information for the CR model and the D- and c-criteria.

The per-observation information at dose ``d`` is the multinomial form
``J^T diag(1/pi) J`` with ``J = d pi / d theta`` (3 x 4).  Because the CR
likelihood factorizes into two logistic pieces the product collapses to a
block-diagonal matrix::

    mu(d) = w_E(d) g_E g_E^T + w_T(d) g_T g_T^T
    g_E = (1, d, 0, 0),  w_E = (1 - p_T) p_E|T (1 - p_E|T)
    g_T = (0, 0, 1, d),  w_T = p_T (1 - p_T)

which is what is assembled here.  Criteria are evaluated through a small
batched Cholesky kernel so a whole particle swarm can be scored at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from lords.cr_model import ThetaParams, obd, outcome_probabilities
from lords.errors import (
    DegenerateDoseError,
    DegenerateGradientError,
    DomainError,
    SingularDesignError,
)

N_PARAMS = 4
PIVOT_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
MERGE_TOL = 0.05
MIN_WEIGHT = 0.01


@dataclass(frozen=True)
class DesignMeasure:
    """Support points (log-doses) with allocation weights summing to one."""

    points: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        p = np.asarray(self.points, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if p.size == 0 or p.size != w.size:
            raise DomainError("design needs matching, non-empty points and weights")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(w))):
            raise DomainError("design points and weights must be finite")
        if np.any(w < 0):
            raise DomainError("design weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise DomainError(f"design weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "points", tuple(float(v) for v in p))
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> DesignMeasure:
        pts, wts = zip(*pairs)
        return cls(tuple(pts), tuple(wts))

    @classmethod
    def normalized(cls, points: ArrayLike, weights: ArrayLike) -> DesignMeasure:
        w = np.asarray(weights, dtype=float)
        return cls(tuple(np.asarray(points, dtype=float)), tuple(w / w.sum()))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def point_array(self) -> NDArray[np.float64]:
        return np.asarray(self.points)

    @property
    def weight_array(self) -> NDArray[np.float64]:
        return np.asarray(self.weights)

    def sorted(self) -> DesignMeasure:
        order = np.argsort(self.point_array, kind="stable")
        return DesignMeasure(
            tuple(self.point_array[order]), tuple(self.weight_array[order])
        )

    def cleanup(self, merge_tol: float = MERGE_TOL, min_weight: float = MIN_WEIGHT) -> DesignMeasure:
        """Merge nearby points, drop negligible weights, renormalize.

        Points closer than ``merge_tol`` (after sorting) collapse into one at
        their weight-averaged location.  If every weight would be dropped the
        heaviest point is kept.
        """
        d = self.sorted()
        pts, wts = [], []
        for x, w in zip(d.points, d.weights):
            if pts and merge_tol > 0 and x - pts[-1] < merge_tol:
                total = wts[-1] + w
                if total > 0:
                    pts[-1] = (pts[-1] * wts[-1] + x * w) / total
                wts[-1] = total
            else:
                pts.append(x)
                wts.append(w)
        p = np.asarray(pts)
        w = np.asarray(wts)
        keep = w >= min_weight
        if not keep.any():
            keep = w == w.max()
        return DesignMeasure.normalized(p[keep], w[keep])


def information_weights(d: ArrayLike, theta: ThetaParams):
    """Return ``(w_E, w_T)``, the logistic variance weights at ``d``."""
    d = np.asarray(d, dtype=float)
    p_e = expit(theta.theta1 + theta.theta2 * d)
    q_e = expit(-(theta.theta1 + theta.theta2 * d))
    p_t = expit(theta.theta3 + theta.theta4 * d)
    q_t = expit(-(theta.theta3 + theta.theta4 * d))
    return q_t * p_e * q_e, p_t * q_t


def _assemble(d, w_e, w_t):
    """Stack block-diagonal information matrices along leading axes."""
    d = np.asarray(d, dtype=float)
    out = np.zeros(d.shape + (N_PARAMS, N_PARAMS))
    out[..., 0, 0] = w_e
    out[..., 0, 1] = out[..., 1, 0] = w_e * d
    out[..., 1, 1] = w_e * d * d
    out[..., 2, 2] = w_t
    out[..., 2, 3] = out[..., 3, 2] = w_t * d
    out[..., 3, 3] = w_t * d * d
    return out


def mu(d: float, theta: ThetaParams) -> NDArray[np.float64]:
    """Per-observation information matrix at a single dose."""
    if not math.isfinite(d):
        raise DomainError("dose must be finite")
    probs = outcome_probabilities(d, theta)
    if min(float(p) for p in probs) <= 0.0:
        raise DegenerateDoseError(f"an outcome probability vanishes at dose {d}")
    w_e, w_t = information_weights(d, theta)
    return _assemble(d, w_e, w_t)


def mu_many(doses: ArrayLike, theta: ThetaParams) -> NDArray[np.float64]:
    """``mu`` at every dose in ``doses``; shape ``doses.shape + (4, 4)``."""
    doses = np.asarray(doses, dtype=float)
    w_e, w_t = information_weights(doses, theta)
    return _assemble(doses, w_e, w_t)


def design_fim(design: DesignMeasure, theta: ThetaParams) -> NDArray[np.float64]:
    mats = mu_many(design.point_array, theta)
    return np.einsum("i,ijk->jk", design.weight_array, mats)


def design_fim_batch(
    points: NDArray[np.float64], weights: NDArray[np.float64], theta: ThetaParams
) -> NDArray[np.float64]:
    """Information matrices for a batch of designs.

    ``points`` and ``weights`` have shape ``(batch, m)``; the result has
    shape ``(batch, 4, 4)``.
    """
    w_e, w_t = information_weights(points, theta)
    we = weights * w_e
    wt = weights * w_t
    e0, e1, e2 = we.sum(-1), (we * points).sum(-1), (we * points * points).sum(-1)
    t0, t1, t2 = wt.sum(-1), (wt * points).sum(-1), (wt * points * points).sum(-1)
    out = np.zeros(points.shape[:-1] + (N_PARAMS, N_PARAMS))
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = e0, e1, e1, e2
    out[..., 2, 2], out[..., 2, 3], out[..., 3, 2], out[..., 3, 3] = t0, t1, t1, t2
    return out


# ---------------------------------------------------------------------------
# Small dense symmetric kernel
# ---------------------------------------------------------------------------

def cholesky_batch(m: NDArray[np.float64], tol: float = PIVOT_TOL):
    """Lower Cholesky factors of a stack of symmetric matrices.

    Returns ``(L, ok)``.  A matrix is flagged not ok when some pivot falls
    to ``tol`` times its original diagonal entry or below; its factor is
    then garbage and must not be used.  Loops are over matrix indices only,
    so each step is one vectorized operation across the stack.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[-1]
    cols = [[None] * n for _ in range(n)]
    ok = np.ones(m.shape[:-2], dtype=bool)
    for j in range(n):
        s = m[..., j, j]
        for k in range(j):
            s = s - cols[j][k] * cols[j][k]
        good = s > tol * np.abs(m[..., j, j])
        ok &= good
        root = np.sqrt(np.where(good, s, 1.0))
        cols[j][j] = root
        for i in range(j + 1, n):
            r = m[..., i, j]
            for k in range(j):
                r = r - cols[i][k] * cols[j][k]
            cols[i][j] = r / root
    lower = np.zeros_like(m)
    for i in range(n):
        for j in range(i + 1):
            lower[..., i, j] = cols[i][j]
    return lower, ok


def _forward(lower, b):
    n = lower.shape[-1]
    y = [None] * n
    for i in range(n):
        r = b[..., i]
        for k in range(i):
            r = r - lower[..., i, k] * y[k]
        y[i] = r / lower[..., i, i]
    return np.stack(y, axis=-1)


def _logdet_from_factor(lower):
    return 2.0 * np.sum(np.log(np.diagonal(lower, axis1=-2, axis2=-1)), axis=-1)


def d_criterion_fim(m: NDArray[np.float64]) -> NDArray[np.float64] | float:
    """``-ln det M``; ``inf`` where ``M`` is not positive definite."""
    lower, ok = cholesky_batch(m)
    val = np.where(ok, -_logdet_from_factor(lower), np.inf)
    return float(val) if val.ndim == 0 else val


def c_criterion_fim(m: NDArray[np.float64], c: ArrayLike) -> NDArray[np.float64] | float:
    """``c^T M^-1 c`` via the Cholesky factor; ``inf`` where singular."""
    lower, ok = cholesky_batch(m)
    c = np.asarray(c, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        y = _forward(lower, np.broadcast_to(c, m.shape[:-1]))
        val = np.where(ok, np.sum(y * y, axis=-1), np.inf)
    return float(val) if val.ndim == 0 else val


def solve_fim(m: NDArray[np.float64], b: ArrayLike) -> NDArray[np.float64]:
    """Solve ``M x = b`` for a single positive definite ``M``."""
    lower, ok = cholesky_batch(m)
    if not bool(ok):
        raise SingularDesignError("information matrix is not positive definite")
    y = _forward(lower, np.asarray(b, dtype=float))
    # back substitution with L^T
    n = lower.shape[-1]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (y[i] - lower[i + 1 :, i] @ x[i + 1 :]) / lower[i, i]
    return x


def d_criterion(design: DesignMeasure, theta: ThetaParams) -> float:
    return d_criterion_fim(design_fim(design, theta))


def c_criterion(design: DesignMeasure, theta: ThetaParams, c: Sequence[float]) -> float:
    return c_criterion_fim(design_fim(design, theta), c)


# ---------------------------------------------------------------------------
# Gradient of the OBD
# ---------------------------------------------------------------------------

def c_vector(theta: ThetaParams) -> NDArray[np.float64]:
    """``d OBD / d theta`` by implicit differentiation.

    The OBD solves ``F = theta4 p_T - theta2 (1 - p_E|T) = 0``, so
    ``c_i = -(dF/dtheta_i) / (dF/dd)``.
    """
    t1, t2, t3, t4 = theta.as_array()
    d = obd(theta)
    a = float(expit(t1 + t2 * d))
    qa = float(expit(-(t1 + t2 * d)))
    t = float(expit(t3 + t4 * d))
    qt = float(expit(-(t3 + t4 * d)))
    va, vt = a * qa, t * qt
    dfdd = t4 * t4 * vt + t2 * t2 * va
    if abs(dfdd) < 1e-12:
        raise DegenerateGradientError(f"dF/dd = {dfdd!r} at OBD {d}")
    grad = np.array([t2 * va, -qa + t2 * va * d, t4 * vt, t + t4 * vt * d])
    return -grad / dfdd
