"""Shared oracles for the test suite."""

from __future__ import annotations

import numpy as np

from lords.cr_model import outcome_probabilities

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}"
    if detail:
        line += f": {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def match_design(design, printed, point_tol=0.05, weight_tol=0.02):
    """Compare a design with a printed (dose, weight) table.

    Every printed point needs a recovered point within ``point_tol`` whose
    weight is within ``weight_tol``.  Recovered points left unmatched must
    carry no more than ``weight_tol``, since the table cannot show them.
    Returns a list of mismatch messages (empty on success).
    """
    pts = list(design.points)
    wts = list(design.weights)
    used = set()
    problems = []
    for x, w in printed:
        cand = [i for i, p in enumerate(pts) if i not in used and abs(p - x) <= point_tol]
        if not cand:
            problems.append(f"no point near {x:.2f}")
            continue
        i = min(cand, key=lambda i: abs(pts[i] - x))
        used.add(i)
        if abs(wts[i] - w) > weight_tol:
            problems.append(f"weight at {x:.2f} is {wts[i]:.3f}, expected {w:.2f}")
    for i, (p, w) in enumerate(zip(pts, wts)):
        if i not in used and w > weight_tol:
            problems.append(f"extra point {p:.2f} with weight {w:.3f}")
    return problems


def simulate_rwr(theta, grid, gamma, steps, rng):
    """Empirical dose frequencies of the random walk rule.

    Neutral outcome moves up, success stays, toxicity moves down; moves are
    capped at the highest dose with toxicity at most ``gamma`` and at the
    lowest dose.  Starts at the lowest dose.
    """
    pi0, pi1, pi2 = (np.asarray(p) for p in outcome_probabilities(grid.array, theta))
    top = int(np.flatnonzero(pi2 <= gamma)[-1])
    u = rng.random(steps)
    counts = np.zeros(len(grid))
    m = 0
    cum0 = pi0.tolist()
    cum1 = (pi0 + pi1).tolist()
    for r in u.tolist():
        counts[m] += 1
        if r < cum0[m]:
            m = min(m + 1, top)
        elif r >= cum1[m]:
            m = max(m - 1, 0)
    return counts / steps
