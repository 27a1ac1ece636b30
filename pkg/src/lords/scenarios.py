"""Preset dose-response scenarios and the reference dose grid."""

from __future__ import annotations

from lords.cr_model import DiscreteGrid, ThetaParams

SCENARIOS: dict[str, ThetaParams] = {
    "A": ThetaParams(0.855, 0.566, -5.768, 1.0),  # narrow therapeutic window
    "B": ThetaParams(2.017, 2.827, -11.537, 2.0),  # wide window
    "C": ThetaParams(-3.539, 1.124, -26.618, 3.674),  # all doses safe
    "D": ThetaParams(1.437, 0.125, -1.525, 1.227),  # toxic at low doses
}

# log(mg) for 0.3 .. 320 mg
DEFAULT_GRID = DiscreteGrid((-1.20, -0.23, 0.92, 2.02, 3.00, 3.69, 4.38, 5.08, 5.77))

DEFAULT_GAMMA = 0.2
DEFAULT_DELTA = 0.2


def scenario(name: str) -> ThetaParams:
    try:
        return SCENARIOS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
