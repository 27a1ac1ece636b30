"""Particle swarm optimization over design measures.

Two particle encodings are supported.  A continuous design with ``n``
candidate points is a vector ``(d_1..d_n, r_1..r_n)`` of doses followed by
raw weights; a design on a fixed set of ``K`` doses is the raw weight
vector alone.  Raw weights become allocation proportions by squaring and
normalizing, ``rho_i = r_i^2 / sum r_j^2``.

The swarm minimizes.  Objectives receive a whole swarm at once as
``(points, weights)`` arrays of shape ``(S, m)`` and return ``S`` values,
with ``inf`` for designs that cannot be scored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from lords.errors import DomainError
from lords.information import MERGE_TOL, MIN_WEIGHT, DesignMeasure

logger = logging.getLogger(__name__)

BatchObjective = Callable[[NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]

DEFAULT_SUPPORT = 10  # 4 * 5 / 2, bound on D-optimal support size for 4 parameters
_PRE_POLISH_FRACTION = 0.01  # first cleanup pass only drops weights below 1% of min_weight


@dataclass(frozen=True)
class InertiaSchedule:
    """``w_j = w_end + (w_start - w_end) * ((N - j) / (N - 1)) ** gamma``."""

    w_start: float = 0.9
    w_end: float = 0.4
    gamma: float = 1.25

    def __post_init__(self) -> None:
        if not (self.w_start >= self.w_end > 0):
            raise DomainError("inertia needs w_start >= w_end > 0")
        if not self.gamma > 0:
            raise DomainError("inertia relaxation gamma must be positive")

    def weights(self, n_iters: int) -> NDArray[np.float64]:
        """Inertia for iterations ``1..n_iters``."""
        if n_iters == 1:
            return np.array([self.w_start])
        j = np.arange(1, n_iters + 1)
        frac = (n_iters - j) / (n_iters - 1)
        return self.w_end + (self.w_start - self.w_end) * frac**self.gamma


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 50
    max_iters: int = 1500
    c1: float = 2.5
    c2: float = 0.5
    inertia: InertiaSchedule = field(default_factory=InertiaSchedule)
    seed: int = 20240601
    restarts: int = 10
    stall_iters: int = 200
    rel_tol: float = 1e-10
    n_support: int = DEFAULT_SUPPORT
    merge_tol: float = MERGE_TOL
    min_weight: float = MIN_WEIGHT
    polish: bool = True

    def __post_init__(self) -> None:
        if self.swarm_size < 2:
            raise DomainError("swarm_size must be at least 2")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if self.c1 < 0 or self.c2 < 0:
            raise DomainError("c1 and c2 must be nonnegative")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")
        if self.n_support < 1:
            raise DomainError("n_support must be at least 1")

    def with_(self, **changes) -> PsoConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class ContinuousEncoding:
    """``n`` free support points in ``[lower, upper]`` plus raw weights."""

    n: int
    lower: float
    upper: float

    @property
    def dim(self) -> int:
        return 2 * self.n

    def bounds(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        lo = np.r_[np.full(self.n, self.lower), np.zeros(self.n)]
        hi = np.r_[np.full(self.n, self.upper), np.ones(self.n)]
        return lo, hi

    def split(self, positions: NDArray[np.float64]):
        points = positions[..., : self.n]
        return points, normalize_weights(positions[..., self.n :])


@dataclass(frozen=True)
class DiscreteEncoding:
    """Raw weights over a fixed set of admissible doses."""

    doses: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.doses)

    def bounds(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        return np.zeros(self.dim), np.ones(self.dim)

    def split(self, positions: NDArray[np.float64]):
        points = np.broadcast_to(np.asarray(self.doses), positions.shape)
        return points, normalize_weights(positions)


Encoding = Union[ContinuousEncoding, DiscreteEncoding]


@dataclass
class PsoResult:
    best_design: DesignMeasure
    best_value: float
    iterations_run: int
    history: list[tuple[int, float]]
    restart_index: int
    raw_value: float = float("nan")  # swarm optimum before cleanup/polish
    restart_values: list[float] = field(default_factory=list)


def normalize_weights(raw: NDArray[np.float64]) -> NDArray[np.float64]:
    """Square-and-normalize raw weights along the last axis.

    All-zero rows fall back to uniform weights.
    """
    sq = np.square(raw)
    total = sq.sum(axis=-1, keepdims=True)
    uniform = np.full_like(sq, 1.0 / sq.shape[-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, sq / np.where(total > 0, total, 1.0), uniform)


def _merge_tol(encoding: Encoding, merge_tol: float) -> float:
    # grid doses are fixed; merging them would leave the grid
    return merge_tol if isinstance(encoding, ContinuousEncoding) else 0.0


def decode(position: NDArray[np.float64], encoding: Encoding, cleanup: bool = True,
           merge_tol: float = MERGE_TOL, min_weight: float = MIN_WEIGHT) -> DesignMeasure:
    """Turn one particle position into a design measure.

    With ``cleanup`` the design is passed through
    :meth:`DesignMeasure.cleanup`; grid designs never merge points.
    """
    points, weights = encoding.split(np.asarray(position, dtype=float))
    design = DesignMeasure.normalized(points, weights)
    if not cleanup:
        return design.sorted()
    return design.cleanup(_merge_tol(encoding, merge_tol), min_weight)


@dataclass
class SwarmRun:
    """Outcome of one independent swarm."""

    position: NDArray[np.float64]
    value: float
    iterations: int
    history: list[tuple[int, float]]


def swarm_minimize(
    f: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    lower: NDArray[np.float64],
    upper: NDArray[np.float64],
    cfg: PsoConfig,
    rngs: Sequence[np.random.Generator],
) -> list[SwarmRun]:
    """Minimize a vectorized function over a box with independent swarms.

    One swarm runs per generator in ``rngs``; all swarms are stepped
    together as a ``(R, S, dim)`` array so the objective sees one big batch.
    ``f`` maps positions ``(N, dim)`` to values ``(N,)``.  Each swarm draws
    only from its own generator, in a fixed order, and stops on its own.
    History entry 0 is the initial swarm.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    span = upper - lower
    n_runs, size, dim = len(rngs), cfg.swarm_size, lower.size

    def evaluate(pos):
        return np.asarray(f(pos.reshape(-1, dim)), dtype=float).reshape(len(pos), size)

    x = np.stack([lower + g.random((size, dim)) * span for g in rngs])
    v = np.stack([(g.random((size, dim)) - 0.5) * span for g in rngs])
    fx = evaluate(x)
    pbest, pbest_f = x.copy(), fx.copy()
    idx = np.argmin(pbest_f, axis=1)
    gbest = pbest[np.arange(n_runs), idx].copy()
    gbest_f = pbest_f[np.arange(n_runs), idx].copy()
    histories = [[(0, float(gbest_f[r]))] for r in range(n_runs)]
    iters = np.zeros(n_runs, dtype=int)
    active = np.ones(n_runs, dtype=bool)

    inertia = cfg.inertia.weights(cfg.max_iters)
    r1 = np.zeros_like(x)
    r2 = np.zeros_like(x)
    for it in range(1, cfg.max_iters + 1):
        live = np.flatnonzero(active)
        for r in live:
            r1[r] = rngs[r].random((size, dim))
            r2[r] = rngs[r].random((size, dim))
        v_new = (inertia[it - 1] * v + cfg.c1 * r1 * (pbest - x)
                 + cfg.c2 * r2 * (gbest[:, None, :] - x))
        x_new = x + v_new
        clipped = (x_new < lower) | (x_new > upper)
        x_new = np.clip(x_new, lower, upper)
        v_new[clipped] = 0.0
        x[live] = x_new[live]
        v[live] = v_new[live]

        fx = np.full((n_runs, size), np.inf)
        fx[live] = evaluate(x[live])
        better = (fx < pbest_f) & active[:, None]
        pbest[better] = x[better]
        pbest_f[better] = fx[better]
        idx = np.argmin(pbest_f, axis=1)
        cand_f = pbest_f[np.arange(n_runs), idx]
        improved = (cand_f < gbest_f) & active
        gbest[improved] = pbest[improved, idx[improved]]
        gbest_f[improved] = cand_f[improved]

        for r in live:
            hist = histories[r]
            hist.append((it, float(gbest_f[r])))
            iters[r] = it
            if it >= cfg.stall_iters:
                old = hist[it - cfg.stall_iters][1]
                if np.isfinite(old) and old - gbest_f[r] <= cfg.rel_tol * max(abs(old), 1e-300):
                    active[r] = False
        if not active.any():
            break
    return [
        SwarmRun(gbest[r].copy(), float(gbest_f[r]), int(iters[r]), histories[r])
        for r in range(n_runs)
    ]


def _polish(design: DesignMeasure, objective: BatchObjective, encoding: Encoding) -> DesignMeasure:
    """Local refinement of a cleaned-up design with the support size fixed."""
    m = len(design)
    pts0 = design.point_array
    w0 = np.sqrt(design.weight_array)
    if isinstance(encoding, ContinuousEncoding):
        lo, hi = encoding.lower, encoding.upper

        def unpack(z):
            return np.clip(z[:m], lo, hi), normalize_weights(z[m:])

        z0 = np.r_[pts0, w0]
        bounds = [(lo, hi)] * m + [(0.0, 1.0)] * m
    else:
        def unpack(z):
            return pts0, normalize_weights(z)

        z0 = w0
        bounds = [(0.0, 1.0)] * m

    def f(z):
        p, w = unpack(z)
        return float(objective(p[None, :], w[None, :])[0])

    start = f(z0)
    if not np.isfinite(start):
        return design
    res = minimize(f, z0, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-11})
    if not (np.isfinite(res.fun) and res.fun < start):
        return design
    p, w = unpack(res.x)
    return DesignMeasure.normalized(p, w)


def optimize(objective: BatchObjective, encoding: Encoding, cfg: PsoConfig = PsoConfig()) -> PsoResult:
    """Best-of-restarts PSO over designs.

    Each restart gets an independent stream spawned from ``cfg.seed``.  The
    winning swarm optimum has its close points merged, is polished by a
    bounded quasi-Newton step on the surviving support, then loses weights
    below ``cfg.min_weight`` and is polished again if anything changed.
    """

    def f(positions):
        points, weights = encoding.split(positions)
        return objective(points, weights)

    def score(design: DesignMeasure) -> float:
        return float(objective(design.point_array[None, :], design.weight_array[None, :])[0])

    lower, upper = encoding.bounds()
    rngs = [np.random.default_rng(ss) for ss in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)]
    runs = swarm_minimize(f, lower, upper, cfg, rngs)
    values = [run.value for run in runs]
    k = int(np.argmin(values))
    for i, run in enumerate(runs):
        logger.debug("restart %d: value %.12g after %d iterations", i, run.value, run.iterations)
    pos, val, iters, hist = runs[k].position, runs[k].value, runs[k].iterations, runs[k].history
    merge_tol = _merge_tol(encoding, cfg.merge_tol)
    design = decode(pos, encoding, merge_tol=merge_tol, min_weight=cfg.min_weight * _PRE_POLISH_FRACTION)
    if cfg.polish:
        design = _polish(design, objective, encoding)
    cleaned = design.cleanup(merge_tol, cfg.min_weight)
    if cfg.polish and cleaned != design:
        cleaned = _polish(cleaned, objective, encoding).cleanup(merge_tol, cfg.min_weight)
    design = cleaned
    return PsoResult(
        best_design=design,
        best_value=score(design),
        iterations_run=iters,
        history=hist,
        restart_index=k,
        raw_value=val,
        restart_values=values,
    )
