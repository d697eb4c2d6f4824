"""Time integration, Kirchhoff solves and steady-state detection."""
from .kirchhoff import kirchhoff_residual, kirchhoff_solve, weighted_laplacian
from .ndf import IntegratorConfig, SimulationResult, detect_steady, integrate

__all__ = [
    "IntegratorConfig",
    "SimulationResult",
    "detect_steady",
    "integrate",
    "kirchhoff_residual",
    "kirchhoff_solve",
    "weighted_laplacian",
]
