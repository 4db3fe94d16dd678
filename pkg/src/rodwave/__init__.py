"""Numerical experiments for a nonlocal family of rod and shallow-water equations."""

__version__ = "0.1.0"

from .grid import Grid, GridFunction, make_grid  # noqa: E402
from .model import ModelSpec, build_preset, validate_hypotheses  # noqa: E402
from .helmholtz import HelmholtzOperator  # noqa: E402
from .evolve import EvolveOptions, Trajectory, evolve  # noqa: E402

__all__ = ["Grid", "GridFunction", "make_grid", "ModelSpec", "build_preset",
           "validate_hypotheses", "HelmholtzOperator", "EvolveOptions", "Trajectory", "evolve"]
