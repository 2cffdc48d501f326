"""Sandwich attacks, routing games and reordering on constant function market makers."""

from .cfmm_core import (
    Cfmm,
    CurvatureBounds,
    FunctionEdge,
    Kind,
    apply_trade,
    estimate_curvature,
    forward_exchange,
    forward_rate,
    inverse_exchange,
)
from .sandwich import (
    PnlBounds,
    SandwichResult,
    Trade,
    execute_sandwich,
    optimal_sandwich,
    optimal_sandwich_closed_form,
)

__version__ = "0.1.0"
