"""episcale — multiscale epidemic dynamics toolkit.

An agent-based epidemic model on the unit square whose agents carry a
continuous activity (health) state in J = [-1, 1], together with its
mean-field particle counterpart and the spatially homogeneous nonlocal
transport equation for the activity density.  Includes a classical SIR
reference, 1-D Wasserstein metrics, and an experiment runner.
"""

__version__ = "0.1.0"

from episcale.model import (
    Compartments,
    ConstantOne,
    DoubleWell,
    FeasibilityError,
    GaussianActivation,
    IndicatorBall,
    InteractionKernel,
    ModelSpec,
    MollifiedIndicator,
    PiecewiseLinear,
    SharpIndicator,
    SimplifiedLandscape,
    check_feasibility,
    find_u_star,
)

__all__ = [
    "Compartments",
    "ConstantOne",
    "DoubleWell",
    "FeasibilityError",
    "GaussianActivation",
    "IndicatorBall",
    "InteractionKernel",
    "ModelSpec",
    "MollifiedIndicator",
    "PiecewiseLinear",
    "SharpIndicator",
    "SimplifiedLandscape",
    "check_feasibility",
    "find_u_star",
]
