"""Forward-Euler time stepping of the gap system: a monotone upwind scheme.

One Euler step of the particle dynamics is

    y^{n+1}_i = y^n_i + lambda * (V(y^n_{i+1}) - V(y^n_i)),   lambda = dt/ell,

which is the first-order upwind scheme for the Lagrangian conservation law
y_t - V(y)_x = 0. Under the step-size condition lambda * L_v <= 1 the update
is a convex combination of y^n_i and y^n_{i+1}, so bounds, L1 contraction,
total variation decay and the cell entropy inequality all hold exactly (to
rounding), not just in the limit.

The right closure supplies y^n_N: a leader at constant headway M, or the
wrap-around gap of the circular road (whose own update is implied by
conservation of the circle length; the stored gaps never include it).
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .ftl_ode import (
    GAP_SLACK,
    BoundaryMode,
    LagrangianState,
    Leader,
    Periodic,
    leader_gap,
    _closed_gaps,
)
from .velocity_models import VelocityModel

# multiplicative slack on the CFL product so lambda = 1/L_v passes exactly
_CFL_EPS = 1e-12


@dataclass(frozen=True)
class DiscreteRun:
    """A stepped trajectory: recorded states plus scheme metadata."""

    lam: float
    cfl_margin: float
    states: List[LagrangianState]
    record_every: int = 1
    n_steps: int = 0


def cfl_max_dt(ell: float, L_v: float) -> float:
    """Largest stable dt: (dt/ell)*L_v = 1 exactly at dt = ell/L_v."""
    assert ell > 0 and L_v > 0
    return ell / L_v


def exact_landing_steps(
    model: VelocityModel, ell: float, t_end: float, lam0: float
) -> Tuple[int, float]:
    """Step count n and adjusted lambda so n steps of lam*ell hit t_end.

    lam stays within a rounding margin of lam0; if the adjustment would tip
    lam*L_v past the monotonicity guard, one more step is taken instead.
    """
    assert t_end > 0 and lam0 > 0
    n = max(int(np.ceil(t_end / (lam0 * ell) - 1e-9)), 1)
    lam = t_end / (n * ell)
    if lam * model.L_v > 1.0 + _CFL_EPS:
        n += 1
        lam = t_end / (n * ell)
    return n, lam


def _check_cfl(model: VelocityModel, lam: float):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if lam * model.L_v > 1.0 + _CFL_EPS:
        raise ValueError(
            f"lambda*L_v = {lam * model.L_v} > 1: the update is no longer a "
            f"convex combination (monotonicity fails)"
        )


def euler_step_y(
    model: VelocityModel, state: LagrangianState, lam: float
) -> LagrangianState:
    """One forward-Euler step on the gaps; advances t by lam*ell.

    The anchor z_1 advances at V(y_1). In periodic mode the closure value is
    the current wrap gap, so the full N-cell cycle (stored gaps plus wrap)
    evolves as one cyclic upwind scheme and the circle length is conserved.
    """
    _check_cfl(model, lam)
    y_ext = _closed_gaps(state)
    speeds = model.v(1.0 / y_ext)
    y_new = state.y + lam * np.diff(speeds)
    return LagrangianState(
        t=state.t + lam * state.ell,
        ell=state.ell,
        z1=state.z1 + lam * state.ell * float(speeds[0]),
        y=y_new,
        boundary=state.boundary,
    )


def euler_step_z(
    model: VelocityModel,
    positions: Sequence[float],
    ell: float,
    boundary: BoundaryMode,
    dt: float,
) -> np.ndarray:
    """One Euler step directly on positions: z_i += dt * v(ell/(z_{i+1}-z_i)).

    The front vehicle uses the closure: speed v(1/M) behind a leader, or the
    wrap gap on a circle. Commutes with euler_step_y: taking gaps afterwards
    equals stepping the gaps directly.
    """
    pos = np.asarray(positions, dtype=float)
    assert pos.ndim == 1 and pos.size >= 2
    gaps = np.diff(pos) / ell
    if float(gaps.min()) < 1.0 - GAP_SLACK:
        raise ValueError(f"positions overlap: min gap {gaps.min()} < 1")
    if dt > cfl_max_dt(ell, model.L_v) * (1.0 + _CFL_EPS):
        raise ValueError(f"dt={dt} exceeds cfl_max_dt={cfl_max_dt(ell, model.L_v)}")
    if isinstance(boundary, Leader):
        closure = boundary.M
    else:
        closure = ((boundary.b - boundary.a) - (pos[-1] - pos[0])) / ell
        if closure < 1.0 - GAP_SLACK:
            raise ValueError(f"periodic wrap-around gap {closure} < 1")
    y_ext = np.append(gaps, closure)
    return pos + dt * model.v(1.0 / y_ext)


def run_discrete(
    model: VelocityModel,
    initial: LagrangianState,
    t_end: float,
    lam: float,
    record_every: Optional[int] = None,
) -> DiscreteRun:
    """Iterate euler_step_y until t >= t_end, recording every stride-th state.

    Default stride: every step for N <= 1000 vehicles, else about 100 evenly
    spaced snapshots. The initial and final states are always recorded.
    """
    _check_cfl(model, lam)
    dt = lam * initial.ell
    n = max(int(np.ceil((t_end - initial.t) / dt - 1e-9)), 0)
    if record_every is None:
        record_every = 1 if initial.n_vehicles <= 1000 else max(1, n // 100)

    states = [initial]
    cur = initial
    for i in range(n):
        cur = euler_step_y(model, cur, lam)
        if (i + 1) % record_every == 0 or i == n - 1:
            states.append(cur)
    return DiscreteRun(
        lam=lam,
        cfl_margin=lam * model.L_v,
        states=states,
        record_every=record_every,
        n_steps=n,
    )


def step_sequence(
    model: VelocityModel,
    y0: np.ndarray,
    boundary: BoundaryMode,
    ell: float,
    lam: float,
    n_steps: int,
    enforce_cfl: bool = True,
) -> np.ndarray:
    """Raw gap history over n_steps, shape (n_steps+1, len(y0)).

    The bare update kernel with no state validation. With enforce_cfl=False
    it will happily run an unstable lambda; that is its purpose (negative
    controls and the command-line --unsafe flag). Gaps reaching 0 abort: the
    speed law's argument 1/y loses meaning.
    """
    if enforce_cfl:
        _check_cfl(model, lam)
    y = np.array(y0, dtype=float)
    span = None if isinstance(boundary, Leader) else boundary.b - boundary.a
    hist = np.empty((n_steps + 1, y.size))
    hist[0] = y
    for n in range(n_steps):
        closure = boundary.M if span is None else span / ell - y.sum()
        y_ext = np.append(y, closure)
        if float(y_ext.min()) <= 0.0:
            raise FloatingPointError(
                f"gap collapsed to {y_ext.min()} at step {n}: scheme blew up"
            )
        y = y + lam * np.diff(model.v(1.0 / y_ext))
        hist[n + 1] = y
    return hist


def monotonicity_weights(model: VelocityModel, state: LagrangianState) -> np.ndarray:
    """Incremental weights theta_{i+1/2} of the convex-combination form.

    y^{n+1}_i = (1 - lam*theta) y^n_i + lam*theta y^n_{i+1} with
    theta = (V(y_{i+1}) - V(y_i)) / (y_{i+1} - y_i) >= 0, set to 0 when the
    gap difference vanishes. Always within [0, L_v].
    """
    y_ext = _closed_gaps(state)
    speeds = model.v(1.0 / y_ext)
    dy = np.diff(y_ext)
    dV = np.diff(speeds)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(dy == 0.0, 0.0, dV / np.where(dy == 0.0, 1.0, dy))
    return theta
