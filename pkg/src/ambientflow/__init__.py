"""Numerical laboratory for anisotropic curve shortening flow with an
ambient force field."""

__version__ = "0.1.0"

from .field import AmbientField
from .flow import FlowParams, StepControl, evolve
from .geometry import ClosedCurve, compute_geometry

__all__ = ["AmbientField", "ClosedCurve", "FlowParams", "StepControl",
           "compute_geometry", "evolve", "__version__"]
