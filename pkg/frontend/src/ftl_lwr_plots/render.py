"""Figure builders and file renderers for the grid and density artifacts."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import DENSITY_COLUMNS, GRID_COLUMNS, InputError, read_table

FIGSIZE = (10.0, 4.5)
DPI = 140
_LEVEL_STYLE = dict(color="0.75", linewidth=0.6)
_PATH_STYLE = dict(color="#1f3d7a", linewidth=0.9)


@dataclass(frozen=True)
class PlotSpec:
    in_dir: str
    out_file: str
    kind: str  # "grid" | "density"
    times: Optional[Tuple[float, ...]] = None


def build_grid_figure(table: dict):
    """Two panels from grid.csv: the rectangular mass grid and its road image.

    Left: vertical lines x = x_{i-1/2} and horizontal time levels. Right: the
    same lattice pushed to road coordinates, where the vertical lines become
    the vehicle paths. Artists carry gids (mass-line/mass-level on the left,
    trajectory/time-level on the right) so consumers can audit the counts.
    """
    vehicles = np.unique(table["i"].astype(int))
    levels = np.unique(table["n"].astype(int))
    fig, (ax_mass, ax_road) = plt.subplots(1, 2, figsize=FIGSIZE, dpi=DPI)

    order_n = np.argsort(table["n"], kind="stable")
    t_of_level = {}
    for n in levels:
        sel = table["n"] == n
        t_of_level[n] = float(table["t"][sel][0])

    x_all = table["x_left"]
    t_lo, t_hi = float(table["t"].min()), float(table["t"].max())
    for i in vehicles:
        sel = table["i"] == i
        x = float(x_all[sel][0])
        (line,) = ax_mass.plot([x, x], [t_lo, t_hi], **_PATH_STYLE)
        line.set_gid(f"mass-line-{i}")
    x_lo, x_hi = float(x_all.min()), float(x_all.max())
    for n in levels:
        (line,) = ax_mass.plot([x_lo, x_hi], [t_of_level[n]] * 2, **_LEVEL_STYLE)
        line.set_gid(f"mass-level-{n}")
    ax_mass.set_xlabel("x")
    ax_mass.set_ylabel("t")
    ax_mass.set_title("mass grid")

    for n in levels:
        sel = table["n"] == n
        z = np.sort(table["z_i"][sel])
        (line,) = ax_road.plot(z, np.full(z.size, t_of_level[n]), **_LEVEL_STYLE)
        line.set_gid(f"time-level-{n}")
    for i in vehicles:
        sel = table["i"] == i
        t = table["t"][sel]
        z = table["z_i"][sel]
        order = np.argsort(t, kind="stable")
        (line,) = ax_road.plot(z[order], t[order], **_PATH_STYLE)
        line.set_gid(f"trajectory-{i}")
    ax_road.set_xlabel("z")
    ax_road.set_ylabel("t")
    ax_road.set_title("road grid (vehicle paths)")

    fig.tight_layout()
    return fig


def _match_times(available: np.ndarray, requested: Optional[Sequence[float]]):
    levels = np.unique(available)
    if requested is None:
        return [float(t) for t in levels]
    picked = []
    for want in requested:
        hit = levels[np.abs(levels - want) <= 1e-9 * max(1.0, abs(want))]
        if hit.size == 0:
            raise InputError(
                f"requested time {want} not present; file has {list(levels)}"
            )
        picked.append(float(hit[0]))
    return picked


def build_density_figure(table: dict, times: Optional[Sequence[float]] = None):
    """Step plot of the reconstructed density at each requested time."""
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    for t in _match_times(table["t"], times):
        sel = table["t"] == t
        order = np.argsort(table["z_left"][sel], kind="stable")
        lo = table["z_left"][sel][order]
        hi = table["z_right"][sel][order]
        rho = table["rho"][sel][order]
        edges = np.append(lo, hi[-1])
        artist = ax.stairs(rho, edges, baseline=None, label=f"t = {t:g}", linewidth=1.4)
        artist.set_gid(f"density-{t:g}")
    ax.set_xlabel("z")
    ax.set_ylabel("rho")
    ax.set_ylim(bottom=0.0)
    ax.legend()
    fig.tight_layout()
    return fig


def _save(fig, out_file: str) -> str:
    try:
        fig.savefig(out_file)
    finally:
        plt.close(fig)
    return out_file


def render_grid(spec: PlotSpec) -> str:
    table = read_table(f"{spec.in_dir}/grid.csv", GRID_COLUMNS)
    return _save(build_grid_figure(table), spec.out_file)


def render_density(spec: PlotSpec) -> str:
    table = read_table(f"{spec.in_dir}/density.csv", DENSITY_COLUMNS)
    return _save(build_density_figure(table, spec.times), spec.out_file)
