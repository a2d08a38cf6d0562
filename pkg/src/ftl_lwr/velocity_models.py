"""Speed laws for the particle system and their Lagrangian form.

A model bundles the Eulerian speed law v(rho), its maximum speed v_max, and a
Lipschitz constant L_v for the Lagrangian speed V(y) = v(1/y) on y >= 1. Every
law must satisfy: v non-increasing on [0,1], v(0) = v_max, v identically 0 for
rho >= 1. Then V is non-decreasing on [1, inf), bounded by v_max, and L_v
controls the stable step size of every scheme downstream.
"""

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

# sampling used by validate();  10^4 points on [0, 2] for v, a graded y-grid
# for difference quotients of V
_GRID_SAMPLES = 10_000
_CHECK_TOL = 1e-12


@dataclass(frozen=True)
class Violation:
    check: str
    where: float
    magnitude: float


@dataclass(frozen=True)
class VelocityModel:
    """Eulerian speed law with Lagrangian metadata.

    v must accept numpy arrays (vectorized) of densities >= 0.
    """

    name: str
    v_max: float
    v: Callable
    L_v: float


def linear_model(v_max: float = 1.0) -> VelocityModel:
    """v(rho) = v_max * max(0, 1 - rho).  The prototypical law.

    V(y) = v_max*(1 - 1/y) has |V'(y)| = v_max/y^2 <= v_max on y >= 1.
    """
    assert v_max > 0

    def v(rho):
        return v_max * np.maximum(0.0, 1.0 - np.asarray(rho, dtype=float))

    return VelocityModel(name="linear", v_max=float(v_max), v=v, L_v=float(v_max))


def quadratic_model(v_max: float = 1.0) -> VelocityModel:
    """v(rho) = v_max * max(0, 1 - rho)^2, a smooth strictly convex variant.

    V(y) = v_max*(1 - 1/y)^2, V'(y) = 2 v_max (1 - 1/y)/y^2, maximal at
    y = 3/2 with value 8 v_max/27.
    """
    assert v_max > 0

    def v(rho):
        return v_max * np.maximum(0.0, 1.0 - np.asarray(rho, dtype=float)) ** 2

    return VelocityModel(
        name="quadratic", v_max=float(v_max), v=v, L_v=float(8.0 * v_max / 27.0)
    )


def custom_model(name: str, v_max: float, v: Callable, L_v: float) -> VelocityModel:
    """Admit a user-supplied law, but only if it passes validate()."""
    model = VelocityModel(name=name, v_max=float(v_max), v=v, L_v=float(L_v))
    problems = validate(model)
    if problems:
        worst = max(problems, key=lambda p: p.magnitude)
        raise ValueError(
            f"velocity law {name!r} rejected: {len(problems)} violation(s), "
            f"worst {worst.check} at {worst.where:.6g} (magnitude {worst.magnitude:.3g})"
        )
    return model


def v_eval(model: VelocityModel, rho: float) -> float:
    """Evaluate v(rho) for a single density."""
    if rho < 0:
        raise ValueError(f"density must be nonnegative, got {rho}")
    return float(model.v(float(rho)))


def V_eval(model: VelocityModel, y: float) -> float:
    """Evaluate the Lagrangian speed V(y) = v(1/y) for a single gap y >= 1."""
    if y < 1:
        raise ValueError(f"gap must be >= 1 (vehicles overlap otherwise), got {y}")
    return float(model.v(1.0 / float(y)))


def lipschitz_constant(model: VelocityModel) -> float:
    """Upper bound for the Lipschitz constant of V on [1, inf)."""
    return model.L_v


def _y_check_grid() -> np.ndarray:
    # dense near y = 1 (where 1/y moves fastest) plus a uniform tail out to
    # y = 100; V' decays like 1/y^2 so nothing interesting lives beyond that
    near = 1.0 / np.linspace(1.0, 0.01, 2000)
    far = np.linspace(1.0, 100.0, 2000)
    return np.unique(np.concatenate([near, far]))


def validate(model: VelocityModel) -> List[Violation]:
    """Check the model assumptions by sampling; empty list means accepted.

    Checks: v non-increasing on the sampled grid of [0, 2]; v(0) = v_max;
    v = 0 on [1, 2]; V non-decreasing with difference quotients <= L_v on a
    graded gap grid.
    """
    out: List[Violation] = []
    rho = np.linspace(0.0, 2.0, _GRID_SAMPLES)
    vv = np.asarray(model.v(rho), dtype=float)

    d = np.diff(vv)
    bad = np.where(d > _CHECK_TOL)[0]
    for i in bad[:16]:
        out.append(Violation("v not non-increasing", float(rho[i]), float(d[i])))

    if abs(vv[0] - model.v_max) > _CHECK_TOL:
        out.append(Violation("v(0) != v_max", 0.0, float(abs(vv[0] - model.v_max))))

    jam = vv[rho >= 1.0]
    worst = float(np.max(np.abs(jam))) if jam.size else 0.0
    if worst > _CHECK_TOL:
        where = float(rho[rho >= 1.0][int(np.argmax(np.abs(jam)))])
        out.append(Violation("v(rho) != 0 for rho >= 1", where, worst))

    yg = _y_check_grid()
    Vg = np.asarray(model.v(1.0 / yg), dtype=float)
    quot = np.diff(Vg) / np.diff(yg)
    bad = np.where(quot < -_CHECK_TOL)[0]
    for i in bad[:16]:
        out.append(Violation("V not non-decreasing", float(yg[i]), float(-quot[i])))
    # sampled-quotient slack: quotients on a grid can exceed sup|V'| only by
    # rounding, but stay permissive enough not to flag exact-arithmetic laws
    excess = quot - model.L_v
    bad = np.where(excess > 1e-9)[0]
    for i in bad[:16]:
        out.append(Violation("Lipschitz bound exceeded", float(yg[i]), float(excess[i])))

    if np.any(Vg > model.v_max + _CHECK_TOL):
        i = int(np.argmax(Vg))
        out.append(Violation("V exceeds v_max", float(yg[i]), float(Vg[i] - model.v_max)))

    return out


_BUILTINS = {"linear": linear_model, "quadratic": quadratic_model}


def model_from_config(cfg: dict) -> VelocityModel:
    """Build a model from {"kind": "linear"|"quadratic", "v_max": number}."""
    kind = cfg.get("kind")
    if kind not in _BUILTINS:
        raise ValueError(
            f"velocity.kind must be one of {sorted(_BUILTINS)}, got {kind!r}"
        )
    v_max = cfg.get("v_max", 1.0)
    if not (isinstance(v_max, (int, float)) and v_max > 0):
        raise ValueError(f"velocity.v_max must be a positive number, got {v_max!r}")
    return _BUILTINS[kind](float(v_max))
