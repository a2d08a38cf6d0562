"""Lagrange <-> Euler bridges: placement, coordinate maps, density rebuild.

The particle state lives on the mass grid x_{i-1/2} = (i-1)*ell. The map
z(x) interpolates vehicle positions linearly in x, its inverse x(z) recovers
the mass coordinate of a road position, and the reconstructed density is

    rho(t, z) = 1 / y_i   on the cell (z_i, z_{i+1}],

a piecewise-constant field in which every cell carries mass exactly ell.
Placement inverts a numerically integrated cumulative mass so the initial
field approximates a requested density profile.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .ftl_ode import (
    GAP_SLACK,
    BoundaryMode,
    LagrangianState,
    Leader,
    Periodic,
    leader_gap,
    positions_from_state,
)

# placement quadrature: composite midpoint panels for the cumulative mass
PLACEMENT_PANELS = 200_000
# gaps this close below 1 are quadrature dust, snapped up to exactly 1
_PLACEMENT_DUST = 1e-9

Extension = Union[str, Tuple[float, float], None]


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """A step function: value values[i] on the half-open cell (edges[i], edges[i+1]].

    extension controls evaluation outside [edges[0], edges[-1]]:
    "periodic" wraps, a (left, right) pair extends by constants, None forbids.
    """

    edges: np.ndarray
    values: np.ndarray
    extension: Extension = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if e.ndim != 1 or v.ndim != 1 or e.size != v.size + 1 or v.size == 0:
            raise ValueError("need len(edges) == len(values) + 1 >= 2")
        if np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing")
        e.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "values", v)

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    def __call__(self, z):
        scalar = np.isscalar(z)
        z = np.atleast_1d(np.asarray(z, dtype=float))
        a, b = self.domain
        if self.extension == "periodic":
            span = b - a
            rel = np.mod(z - a, span)
            # land left edge queries on the cell ending there, not past b
            zq = a + np.where(rel == 0.0, span, rel)
            out = self._eval_inside(zq)
        elif isinstance(self.extension, tuple):
            left, right = self.extension
            inside = (z > a) & (z <= b)
            out = np.where(z <= a, float(left), float(right))
            if np.any(inside):
                out[inside] = self._eval_inside(z[inside])
        else:
            if np.any((z < a) | (z > b)):
                raise ValueError(f"query outside domain [{a}, {b}]")
            zq = np.where(z == a, self.edges[1], z)  # a itself: first cell
            out = self._eval_inside(zq)
        return float(out[0]) if scalar else out

    def _eval_inside(self, z):
        idx = np.searchsorted(self.edges, z, side="left") - 1
        idx = np.clip(idx, 0, self.values.size - 1)
        return self.values[idx]

    def total_variation(self) -> float:
        tv = float(np.abs(np.diff(self.values)).sum())
        if self.extension == "periodic":
            tv += abs(float(self.values[0] - self.values[-1]))
        return tv

    def breakpoints_within(self, lo: float, hi: float) -> np.ndarray:
        """Cell edges strictly inside (lo, hi), tiling if periodic."""
        a, b = self.domain
        if self.extension == "periodic":
            span = b - a
            k0 = int(np.floor((lo - a) / span))
            k1 = int(np.floor((hi - a) / span)) + 1
            cand = np.concatenate(
                [self.edges[:-1] + k * span for k in range(k0, k1 + 1)]
            )
        else:
            cand = self.edges
        return cand[(cand > lo) & (cand < hi)]


class PiecewiseConstantDensity(PiecewiseConstant):
    """A step density: values must lie in (0, 1]."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        if float(v.min()) <= 0.0 or float(v.max()) > 1.0 + 1e-12:
            raise ValueError(
                f"densities must lie in (0, 1], got range "
                f"[{v.min()}, {v.max()}]"
            )


def lagrangian_profile(state: LagrangianState) -> PiecewiseConstant:
    """The gap field y(x) on the mass grid: y_j on ((j-1)*ell, j*ell]."""
    n = state.y.size
    edges = state.ell * np.arange(n + 1, dtype=float)
    return PiecewiseConstant(edges=edges, values=state.y, extension=None)


def _map_nodes(state: LagrangianState):
    xs = state.ell * np.arange(state.n_vehicles, dtype=float)
    zs = positions_from_state(state)
    return xs, zs


def z_map(state: LagrangianState, x):
    """Road position of mass coordinate x, linear on each cell of the mass grid."""
    xs, zs = _map_nodes(state)
    x = np.asarray(x, dtype=float)
    if np.any((x < xs[0]) | (x > xs[-1])):
        raise ValueError(f"x outside the mass domain [0, {xs[-1]}]")
    out = np.interp(x, xs, zs)
    return float(out) if out.ndim == 0 else out

def x_inverse(state: LagrangianState, z):
    """Mass coordinate of road position z in [z_1, z_N]; inverse of z_map."""
    xs, zs = _map_nodes(state)
    z = np.asarray(z, dtype=float)
    if np.any((z < zs[0]) | (z > zs[-1])):
        raise ValueError(f"z outside the vehicle span [{zs[0]}, {zs[-1]}]")
    out = np.interp(z, zs, xs)
    return float(out) if out.ndim == 0 else out


def eulerian_density(state: LagrangianState) -> PiecewiseConstantDensity:
    """Reconstruct rho = 1/y on road cells between consecutive vehicles.

    Leader mode: cells span [z_1, z_N], extended by vacuum on the left and
    the leader's density 1/M on the right. Periodic mode: the N cells of the
    cycle (including the wrap-around cell) are laid out on [a, b], splitting
    the one cell that straddles the seam.
    """
    zs = positions_from_state(state)
    if isinstance(state.boundary, Leader):
        values = 1.0 / state.y
        return PiecewiseConstantDensity(
            edges=zs, values=values, extension=(0.0, 1.0 / state.boundary.M)
        )

    a, b = state.boundary.a, state.boundary.b
    span = b - a
    wrap = leader_gap(state)
    lo = zs
    hi = np.append(zs[1:], zs[-1] + state.ell * wrap)
    val = 1.0 / np.append(state.y, wrap)

    # wrap each cell into [a, b), split any cell crossing b
    cells = []
    for i in range(val.size):
        shift = np.floor((lo[i] - a) / span) * span
        l, h = lo[i] - shift, hi[i] - shift
        if h <= b + 1e-15:
            cells.append((l, min(h, b), val[i]))
        else:
            cells.append((l, b, val[i]))
            cells.append((a, h - span, val[i]))
    cells.sort()

    edges = np.array([c[0] for c in cells] + [b])
    # seams between wrapped cells can carry ~1e-16 dust; chain them exactly
    for i in range(1, len(cells)):
        gap = cells[i][0] - cells[i - 1][1]
        if abs(gap) > 1e-9 * max(1.0, abs(b - a)):
            raise AssertionError(f"periodic cells do not tile the domain: gap {gap}")
    edges[0] = a
    values = np.array([c[2] for c in cells])
    return PiecewiseConstantDensity(edges=edges, values=values, extension="periodic")


def rho0_from_config(cfg: dict) -> Callable:
    """Initial density from {"kind": "constant"|"cosine"|"riemann", ...}.

    constant: {value}; cosine: {offset, amplitude} giving
    offset + amplitude*cos(pi*z); riemann: {left, right, split}.
    """
    kind = cfg.get("kind")
    if kind == "constant":
        value = float(cfg.get("value", 0.5))
        if not 0.0 < value <= 1.0:
            raise ValueError(f"rho0.value must be in (0, 1], got {value}")
        return lambda z: np.full_like(np.asarray(z, dtype=float), value)
    if kind == "cosine":
        off = float(cfg.get("offset", 0.5))
        amp = float(cfg.get("amplitude", 0.5))
        if amp < 0 or off - amp < 0 or off + amp > 1.0:
            raise ValueError(
                f"cosine profile must stay in [0, 1]: offset={off}, amplitude={amp}"
            )
        return lambda z: off + amp * np.cos(np.pi * np.asarray(z, dtype=float))
    if kind == "riemann":
        left = float(cfg.get("left", 0.2))
        right = float(cfg.get("right", 0.8))
        split = float(cfg.get("split", 0.0))
        for name, val in (("left", left), ("right", right)):
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"rho0.{name} must be in [0, 1], got {val}")
        return lambda z: np.where(np.asarray(z, dtype=float) < split, left, right)
    raise ValueError(f"rho0.kind must be constant|cosine|riemann, got {kind!r}")


def place_vehicles(
    rho0: Callable,
    domain: Tuple[float, float],
    N: int,
    mode: BoundaryMode,
    panels: int = PLACEMENT_PANELS,
) -> LagrangianState:
    """Position N vehicles so each inter-vehicle cell carries mass exactly ell.

    Inverts the cumulative mass F(z) = integral of rho0 from a to z on a
    composite-midpoint table: z_i = F^{-1}((i-1)*ell). Periodic mode uses
    ell = m/N (the wrap cell carries the last mass quantum), leader mode
    ell = m/(N-1). The first vehicle sits at a; in leader mode the last sits
    at b.
    """
    a, b = float(domain[0]), float(domain[1])
    if not (a < b and N >= 2 and panels >= 10):
        raise ValueError(f"bad placement request: domain [{a},{b}], N={N}")
    grid = np.linspace(a, b, panels + 1)
    mids = 0.5 * (grid[:-1] + grid[1:])
    dens = np.asarray(rho0(mids), dtype=float)
    if float(dens.min()) < -1e-15 or float(dens.max()) > 1.0 + 1e-12:
        raise ValueError(
            f"rho0 must take values in [0, 1]; sampled range "
            f"[{dens.min()}, {dens.max()}]"
        )
    h = (b - a) / panels
    inc = dens * h
    # flat stretches of F make the inverse ambiguous; tolerate only isolated
    # zero panels (a profile touching zero at points, not on intervals)
    zero = inc == 0.0
    if np.any(zero[:-1] & zero[1:]):
        raise ValueError(
            "rho0 vanishes on a subinterval: cumulative mass is not "
            "invertible there (vehicle position would be arbitrary)"
        )
    # extended-precision running sum: plain float64 cumsum drifts ~1e-12
    # over 2e5 panels, which shows up as gap jitter after inversion
    F = np.concatenate([[0.0], np.cumsum(inc.astype(np.longdouble))]).astype(float)
    m = float(F[-1])
    if m <= 0:
        raise ValueError("rho0 must carry positive total mass")

    if isinstance(mode, Periodic):
        if not (abs(mode.a - a) < 1e-12 and abs(mode.b - b) < 1e-12):
            raise ValueError("periodic placement domain must match the boundary")
        ell = m / N
    else:
        ell = m / (N - 1)
    targets = np.arange(N, dtype=float) * ell
    z = np.interp(targets, F, grid)
    z[0] = a
    if isinstance(mode, Leader):
        z[-1] = b

    y = np.diff(z) / ell
    y = np.where((y < 1.0) & (y > 1.0 - _PLACEMENT_DUST), 1.0, y)
    if float(y.min()) < 1.0 - GAP_SLACK:
        raise ValueError(
            f"placement produced gap {y.min()} < 1; rho0 exceeds 1 somewhere"
        )
    return LagrangianState(t=0.0, ell=float(ell), z1=a, y=y, boundary=mode)
