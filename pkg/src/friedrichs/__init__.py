"""Mesh-free weak solutions of first-order Friedrichs-type PDE systems.

A solution network and an adversarial test network are trained against each
other on Monte Carlo samples of the domain; the minimax value vanishes
exactly at weak solutions, so no smoothness of the target is required.
"""

__version__ = "0.1.0"

__all__ = ["FriedrichsSolver", "preset", "PRESET_NAMES", "__version__"]


def __getattr__(name):
    # lazy so subsystems import independently (and CLI start-up stays light)
    if name == "FriedrichsSolver":
        from .estimator import FriedrichsSolver
        return FriedrichsSolver
    if name in ("preset", "PRESET_NAMES"):
        from . import problems
        return getattr(problems, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
