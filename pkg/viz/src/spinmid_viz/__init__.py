"""Offline plotting of spinmid trajectories and diagnostic reports.

Reads only the documented CSV/JSON file formats produced by the `spinmid`
CLI; no computation of its own beyond what the figures display.
"""

__version__ = "0.1.0"

from .io import SchemaError, load_compare, load_convergence, load_trajectory
from .plots import PlotRequest, build_figure, plot

__all__ = [
    "PlotRequest",
    "SchemaError",
    "build_figure",
    "load_compare",
    "load_convergence",
    "load_trajectory",
    "plot",
]
