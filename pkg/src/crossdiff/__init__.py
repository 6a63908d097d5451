"""Entropy-diminishing TPFA finite volumes for a degenerate cross-diffusion system."""
from ._backend import BACKEND
from .mesh import Mesh, TimeGrid, build_cartesian_2d, build_uniform_1d
from .scheme import CrossDiffusionMatrix, log_mean
from .solver import SolverConfig, simulate

__all__ = ["BACKEND", "Mesh", "TimeGrid", "build_uniform_1d", "build_cartesian_2d",
           "CrossDiffusionMatrix", "log_mean", "SolverConfig", "simulate"]
__version__ = "0.1.0"
