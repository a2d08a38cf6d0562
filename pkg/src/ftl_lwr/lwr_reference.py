"""Independent reference solvers the particle code is measured against.

Three oracles, none of which share code with the particle modules:

  * a first-order Godunov finite-volume solver for the Eulerian law
    rho_t + (rho*v(rho))_z = 0 on a uniform grid,
  * an upwind grid solver for the Lagrangian law y_t - V(y)_x = 0 (the same
    recurrence the particle scheme produces, reimplemented on a bare array
    so the two code paths can be compared to rounding),
  * closed-form Riemann solutions (shock / rarefaction) for the linear
    speed law, exact up to floating point.
"""

from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from .ftl_ode import BoundaryMode, Leader, Periodic
from .lagrange_euler import PiecewiseConstant
from .velocity_models import VelocityModel

_SCAN_POINTS = 10_000


@dataclass(frozen=True)
class FluxLaw:
    """Eulerian flux f(rho) = rho*v(rho) with its precomputed maximizer."""

    f: Callable
    rho_star: float
    f_max: float


def flux_law(model: VelocityModel) -> FluxLaw:
    """Build the flux law, locating argmax f by ternary search on [0, 1].

    Falls back to an exhaustive scan when the law is not unimodal (ternary
    search and scan disagree).
    """

    def f(rho):
        rho = np.asarray(rho, dtype=float)
        return rho * model.v(rho)

    lo, hi = 0.0, 1.0
    while hi - lo > 1e-12:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    star = 0.5 * (lo + hi)

    grid = np.linspace(0.0, 1.0, _SCAN_POINTS)
    fg = f(grid)
    i = int(np.argmax(fg))
    if fg[i] > float(f(star)) + 1e-10:  # not unimodal: trust the scan
        lo, hi = max(grid[i] - 1e-3, 0.0), min(grid[i] + 1e-3, 1.0)
        fine = np.linspace(lo, hi, _SCAN_POINTS)
        j = int(np.argmax(f(fine)))
        star = float(fine[j])
    return FluxLaw(f=f, rho_star=float(star), f_max=float(f(star)))


def godunov_flux(law: FluxLaw, rho_left, rho_right):
    """Godunov numerical flux for a unimodal f: exact Riemann flux at x/t=0."""
    rl = np.asarray(rho_left, dtype=float)
    rr = np.asarray(rho_right, dtype=float)
    fl, fr = law.f(rl), law.f(rr)
    undercompressive = np.minimum(fl, fr)
    crest = (rr <= law.rho_star) & (law.rho_star <= rl)
    compressive = np.where(crest, law.f_max, np.maximum(fl, fr))
    out = np.where(rl <= rr, undercompressive, compressive)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class EulerianGrid:
    """Uniform finite-volume grid with cell averages."""

    z_left: float
    z_right: float
    rho: np.ndarray
    boundary: Union[str, Tuple[float, float]]  # "periodic" or (left, right) ghosts

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("rho must be a nonempty 1-d array of cell averages")
        if float(r.min()) < -1e-12 or float(r.max()) > 1.0 + 1e-12:
            raise ValueError(f"cell averages outside [0,1]: [{r.min()}, {r.max()}]")
        if not self.z_left < self.z_right:
            raise ValueError("need z_left < z_right")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @property
    def dz(self) -> float:
        return (self.z_right - self.z_left) / self.rho.size

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.z_left, self.z_right, self.rho.size + 1)

    def to_density(self) -> PiecewiseConstant:
        ext = "periodic" if self.boundary == "periodic" else self.boundary
        return PiecewiseConstant(edges=self.edges, values=self.rho, extension=ext)


def cell_averages_from_function(
    rho0: Callable, edges: np.ndarray, subsamples: int = 32
) -> np.ndarray:
    """Per-cell midpoint-rule averages of a density function."""
    edges = np.asarray(edges, dtype=float)
    offsets = (np.arange(subsamples) + 0.5) / subsamples
    lo = edges[:-1][:, None]
    w = np.diff(edges)[:, None]
    pts = lo + offsets[None, :] * w
    return np.asarray(rho0(pts), dtype=float).mean(axis=1)


def _wave_speed_bound(law: FluxLaw) -> float:
    grid = np.linspace(0.0, 1.0, _SCAN_POINTS)
    fg = law.f(grid)
    return float(np.max(np.abs(np.diff(fg) / np.diff(grid))))


def godunov_solve(
    law: FluxLaw, grid: EulerianGrid, t_end: float, cfl: float = 0.9
) -> EulerianGrid:
    """March the conservative update to t_end with exact landing.

    dt is chosen so dt*max|f'| <= cfl*dz (max|f'| sampled), then shrunk so an
    integer number of steps lands on t_end.
    """
    if not 0.0 < cfl <= 1.0:
        raise ValueError(f"cfl must be in (0, 1], got {cfl}")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if t_end == 0:
        return grid
    speed = _wave_speed_bound(law)
    dz = grid.dz
    dt_max = cfl * dz / speed
    n = max(int(np.ceil(t_end / dt_max - 1e-9)), 1)
    dt = t_end / n
    rho = np.array(grid.rho, dtype=float)
    periodic = grid.boundary == "periodic"
    if not periodic:
        gl, gr = grid.boundary
    for _ in range(n):
        if periodic:
            ext = np.concatenate([rho[-1:], rho, rho[:1]])
        else:
            ext = np.concatenate([[gl], rho, [gr]])
        flux = godunov_flux(law, ext[:-1], ext[1:])
        rho = rho - (dt / dz) * (flux[1:] - flux[:-1])
    return EulerianGrid(
        z_left=grid.z_left, z_right=grid.z_right, rho=rho, boundary=grid.boundary
    )


def lagrangian_upwind_solve(
    model: VelocityModel,
    y0: np.ndarray,
    boundary: BoundaryMode,
    ell: float,
    t_end: float,
    lam: float,
) -> np.ndarray:
    """Upwind grid solver for y_t - V(y)_x = 0; the cross-check twin.

    Same recurrence as the particle Euler step, written against a bare grid
    function: y_j += lam*(V(y_{j+1}) - V(y_j)) with the top neighbor supplied
    by the boundary (leader constant M, or the circle's wrap gap).
    """
    if lam * model.L_v > 1.0 + 1e-12:
        raise ValueError(f"lambda*L_v = {lam * model.L_v} > 1 refused")
    y = np.array(y0, dtype=float)
    n = max(int(np.ceil(t_end / (lam * ell) - 1e-9)), 0)
    if isinstance(boundary, Periodic):
        total = (boundary.b - boundary.a) / ell
        for _ in range(n):
            ghost = total - float(y.sum())
            speeds = model.v(1.0 / np.append(y, ghost))
            y = y + lam * np.diff(speeds)
    else:
        for _ in range(n):
            speeds = model.v(1.0 / np.append(y, boundary.M))
            y = y + lam * np.diff(speeds)
    return y


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Continuous-or-jump piecewise-linear profile for exact solutions.

    Constant value_left[0] before nodes[0]; linear from values_right[i] to
    values_left[i+1] between consecutive nodes; constant values_right[-1]
    after nodes[-1]. A jump at node i is encoded by values_left[i] !=
    values_right[i].
    """

    nodes: np.ndarray
    values_left: np.ndarray
    values_right: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=float)
        vl = np.asarray(self.values_left, dtype=float)
        vr = np.asarray(self.values_right, dtype=float)
        if not (n.size == vl.size == vr.size and n.size >= 1):
            raise ValueError("nodes/values size mismatch")
        if np.any(np.diff(n) <= 0):
            raise ValueError("nodes must be strictly increasing")
        for a in (n, vl, vr):
            a.setflags(write=False)
        object.__setattr__(self, "nodes", n)
        object.__setattr__(self, "values_left", vl)
        object.__setattr__(self, "values_right", vr)

    def value_and_slope(self, z):
        """Value and slope at points assumed not to sit exactly on a jump."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        val = np.empty_like(z)
        slope = np.zeros_like(z)
        idx = np.searchsorted(self.nodes, z, side="right") - 1
        before = idx < 0
        after = idx >= self.nodes.size - 1
        val[before] = self.values_left[0]
        val[after] = self.values_right[-1]
        mid = ~(before | after)
        i = idx[mid]
        x0 = self.nodes[i]
        x1 = self.nodes[i + 1]
        v0 = self.values_right[i]
        v1 = self.values_left[i + 1]
        s = (v1 - v0) / (x1 - x0)
        val[mid] = v0 + s * (z[mid] - x0)
        slope[mid] = s
        return val, slope

    def __call__(self, z):
        scalar = np.isscalar(z)
        val, _ = self.value_and_slope(z)
        return float(val[0]) if scalar else val


@dataclass(frozen=True)
class RiemannSolution:
    """Entropy solution of the Riemann problem for the linear speed law.

    v(rho) = v_max*(1 - rho), f(rho) = v_max*rho*(1 - rho), f' = v_max*(1-2rho).
    left < right: shock at speed v_max*(1 - left - right).
    left > right: rarefaction fan, linear in z between the two characteristics.
    """

    v_max: float
    left: float
    right: float
    split: float

    def __post_init__(self):
        for name, val in (("left", self.left), ("right", self.right)):
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} state must be in [0,1], got {val}")

    def profile(self, t: float) -> PiecewiseLinear:
        rl, rr, x0 = self.left, self.right, self.split
        if t < 0:
            raise ValueError("t must be nonnegative")
        if rl == rr:
            return PiecewiseLinear([x0], [rl], [rr])
        fprime = lambda r: self.v_max * (1.0 - 2.0 * r)
        if rl < rr or t == 0.0:
            if t == 0.0:
                return PiecewiseLinear([x0], [rl], [rr])
            s = self.v_max * (1.0 - rl - rr)
            return PiecewiseLinear([x0 + s * t], [rl], [rr])
        z_tail = x0 + fprime(rl) * t
        z_head = x0 + fprime(rr) * t
        return PiecewiseLinear([z_tail, z_head], [rl, rr], [rl, rr])


def riemann_exact(
    model: VelocityModel, left: float, right: float, split: float = 0.0
) -> RiemannSolution:
    """Closed-form Riemann solution; only the linear speed law is supported."""
    if model.name != "linear":
        raise ValueError(
            "closed-form Riemann solutions are implemented for the linear "
            f"speed law only, got {model.name!r}"
        )
    return RiemannSolution(v_max=model.v_max, left=left, right=right, split=split)
