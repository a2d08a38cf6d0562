"""Thin plotting layer over the ftl-lwr CSV artifacts.

Consumes only the documented CSV schemas (grid.csv, density.csv); all the
numerics live upstream. Two renderers: the coordinate-grid pair and the
density steps.
"""

from .io import DENSITY_COLUMNS, GRID_COLUMNS, InputError, read_table
from .render import PlotSpec, render_density, render_grid

__all__ = [
    "DENSITY_COLUMNS",
    "GRID_COLUMNS",
    "InputError",
    "PlotSpec",
    "read_table",
    "render_density",
    "render_grid",
]
