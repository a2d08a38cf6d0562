"""The gap ODE system for vehicles following a leader.

With positions z_1 < z_2 < ... < z_N and dimensionless gaps
y_i = (z_{i+1} - z_i)/ell, each vehicle moves at the Lagrangian speed of its
front gap and the gaps obey

    dy_i/dt = (V(y_{i+1}) - V(y_i)) / ell,     i = 1 .. N-1.

The stencil is closed on the right either by a leader running at constant
headway M (y_N = M, the front vehicle moves at V(M) forever) or by wrapping
the road into a circle of length b - a, where the gap from the front vehicle
back around to the first one is determined by the stored gaps:

    y_wrap = (b - a)/ell - sum(y).

On the circle the system is genuinely cyclic: the wrap gap is a dynamical
cell like any other (its neighbor is y_1), it just is not stored separately.

States are immutable; the integrator is classical fixed-step RK4 with the
closure gap recomputed at every stage and a hard floor y >= 1 (vehicles must
not overlap; hitting the floor raises StepRejected rather than clipping).
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .velocity_models import VelocityModel

# slack for the y >= 1 floor; construction, stages and reconstruction all use
# the same constant so a state that passes one gate passes them all
GAP_SLACK = 1e-12


class StepRejected(ValueError):
    """An integration stage produced an overlapping pair of vehicles."""


@dataclass(frozen=True)
class Periodic:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"periodic domain needs a < b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class Leader:
    M: float

    def __post_init__(self):
        if not self.M > 1:
            raise ValueError(f"leader headway must exceed 1, got {self.M}")


BoundaryMode = Union[Periodic, Leader]


@dataclass(frozen=True, eq=False)
class LagrangianState:
    """Complete particle-system state: time, scale, anchor and gaps.

    y holds the stored gaps y_1 .. y_{N-1}; in periodic mode the wrap gap is
    derived (see leader_gap) and must itself be a legal gap.
    """

    t: float
    ell: float
    z1: float
    y: np.ndarray
    boundary: BoundaryMode

    def __post_init__(self):
        if not self.ell > 0:
            raise ValueError(f"vehicle length must be positive, got {self.ell}")
        arr = np.array(self.y, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("y must be a nonempty 1-d array of gaps")
        if float(arr.min()) < 1.0 - GAP_SLACK:
            raise ValueError(
                f"gaps must be >= 1 (min {arr.min()}): vehicles would overlap"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "y", arr)
        if isinstance(self.boundary, Periodic):
            wrap = self._wrap_gap()
            if wrap < 1.0 - GAP_SLACK:
                raise ValueError(
                    f"periodic wrap-around gap {wrap} < 1: road too short for "
                    f"these vehicles"
                )

    @property
    def n_vehicles(self) -> int:
        return self.y.size + 1

    def _wrap_gap(self) -> float:
        span = self.boundary.b - self.boundary.a
        return span / self.ell - float(self.y.sum())


def leader_gap(state: LagrangianState) -> float:
    """The closure gap y_N: the constant M, or the wrap-around gap.

    Periodic: (b - z_N + z_1 - a)/ell with z_N = z_1 + ell*sum(y), which
    reduces to (b - a)/ell - sum(y).
    """
    if isinstance(state.boundary, Leader):
        return state.boundary.M
    wrap = state._wrap_gap()
    if wrap < 1.0 - GAP_SLACK:
        raise ValueError(f"periodic wrap-around gap {wrap} < 1")
    return wrap


def _closed_gaps(state: LagrangianState) -> np.ndarray:
    """Stored gaps with the closure value appended: y_1 .. y_{N-1}, y_N."""
    return np.append(state.y, leader_gap(state))


def _rates(model: VelocityModel, y_ext: np.ndarray, ell: float) -> np.ndarray:
    # y_ext = gaps with closure appended; upwind differences of V
    speeds = model.v(1.0 / y_ext)
    return np.diff(speeds) / ell


def rhs(model: VelocityModel, state: LagrangianState) -> Tuple[np.ndarray, float]:
    """Gap rates and the anchor speed: (dy/dt for i = 1..N-1, dz_1/dt).

    dz_1/dt = V(y_1): the rearmost vehicle follows the one ahead of it.
    """
    y_ext = _closed_gaps(state)
    dy = _rates(model, y_ext, state.ell)
    dz1 = float(model.v(1.0 / y_ext[0]))
    return dy, dz1


def _stage_gaps(state: LagrangianState, y: np.ndarray) -> np.ndarray:
    """Closure-extended gaps for a trial y during a stage, floor-checked."""
    if isinstance(state.boundary, Leader):
        y_ext = np.append(y, state.boundary.M)
    else:
        span = state.boundary.b - state.boundary.a
        y_ext = np.append(y, span / state.ell - y.sum())
    if float(y_ext.min()) < 1.0 - GAP_SLACK:
        raise StepRejected(
            f"stage produced gap {y_ext.min()} < 1; reduce dt (the step-size "
            f"stability bound ell/L_v was likely violated)"
        )
    return y_ext


def _rk4_step(model, state: LagrangianState, dt: float):
    ell = state.ell
    y0, z0 = state.y, state.z1

    def f(y):
        y_ext = _stage_gaps(state, y)
        speeds = model.v(1.0 / y_ext)
        return np.diff(speeds) / ell, float(speeds[0])

    k1, s1 = f(y0)
    k2, s2 = f(y0 + 0.5 * dt * k1)
    k3, s3 = f(y0 + 0.5 * dt * k2)
    k4, s4 = f(y0 + dt * k3)
    y1 = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    z1 = z0 + (dt / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
    _stage_gaps(state, y1)  # final combination must respect the floor too
    return y1, z1


def integrate(
    model: VelocityModel, state: LagrangianState, t_end: float, dt: float
) -> List[LagrangianState]:
    """March the system to t_end with fixed-step RK4; returns all states.

    dt must respect the stability heuristic dt <= ell/L_v. The final step is
    shortened so the trajectory lands on t_end exactly.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > state.ell / model.L_v * (1.0 + 1e-12):
        raise ValueError(
            f"dt={dt} exceeds the stability bound ell/L_v="
            f"{state.ell / model.L_v}"
        )
    if t_end < state.t:
        raise ValueError(f"t_end={t_end} lies before the state time {state.t}")

    out = [state]
    remaining = t_end - state.t
    n = max(int(np.ceil(remaining / dt - 1e-9)), 0)
    cur = state
    for i in range(n):
        step = min(dt, t_end - cur.t)
        y1, z1 = _rk4_step(model, cur, step)
        cur = LagrangianState(
            t=cur.t + step, ell=cur.ell, z1=z1, y=y1, boundary=cur.boundary
        )
        out.append(cur)
    return out


def positions_from_state(state: LagrangianState) -> np.ndarray:
    """Vehicle positions z_1 .. z_N (strictly increasing, gaps = ell*y)."""
    return state.z1 + state.ell * np.concatenate([[0.0], np.cumsum(state.y)])


def gaps_from_positions(positions: Sequence[float], ell: float) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    assert pos.ndim == 1 and pos.size >= 2
    return np.diff(pos) / ell


def entropy_rate_residual(
    model: VelocityModel, state: LagrangianState, k_values: Sequence[float]
) -> float:
    """Largest violation of the instantaneous entropy inequality.

    For each constant k and each cell j the semi-discrete system satisfies

        sgn(y_j - k) * dy_j/dt  <=  (q_{j+1} - q_j)/ell,
        q_j = sgn(y_j - k) * (V(y_j) - V(k)),

    exactly (the two sides differ by (sgn_j - sgn_{j+1})(V(y_{j+1}) - V(k)),
    which is never positive since V is non-decreasing). Returns the maximum
    positive excess of the left side over the right, across all j and k; a
    correct state returns rounding noise only. Periodic states include the
    wrap cell with cell 1 as its neighbor.
    """
    y_ext = _closed_gaps(state)  # cells 1..N
    if isinstance(state.boundary, Periodic):
        nxt = np.concatenate([y_ext[1:], y_ext[:1]])
        cells = y_ext
    else:
        # leader cell N is constant-in-time; its own inequality is 0 <= 0
        cells = y_ext[:-1]
        nxt = y_ext[1:]
    Vc = model.v(1.0 / cells)
    Vn = model.v(1.0 / nxt)
    worst = 0.0
    for k in k_values:
        k = float(k)
        if k < 1:
            raise ValueError(f"entropy constants must satisfy k >= 1, got {k}")
        Vk = float(model.v(1.0 / k))
        sc = np.sign(cells - k)
        sn = np.sign(nxt - k)
        lhs = sc * (Vn - Vc)
        rhs_q = sn * (Vn - Vk) - sc * (Vc - Vk)
        worst = max(worst, float(np.max(lhs - rhs_q)) / state.ell)
    return worst
