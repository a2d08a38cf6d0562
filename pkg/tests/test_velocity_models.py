"""Speed-law construction, evaluation, and the numerical validator."""

import numpy as np
import pytest

from ftl_lwr.velocity_models import (
    VelocityModel,
    custom_model,
    linear_model,
    lipschitz_constant,
    model_from_config,
    quadratic_model,
    v_eval,
    V_eval,
    validate,
)


def sampled_lipschitz(model, lo=1.0, hi=100.0, n=20001):
    """Max difference quotient of V on a fine grid; independent oracle."""
    y = np.linspace(lo, hi, n)
    V = model.v(1.0 / y)
    return float(np.max(np.abs(np.diff(V) / np.diff(y))))


def test_prototypical_point_values():
    m = linear_model(1.0)
    assert v_eval(m, 0.0) == 1.0
    assert v_eval(m, 1.0) == 0.0
    assert v_eval(m, 0.5) == 0.5
    assert v_eval(m, 2.0) == 0.0  # jammed beyond rho=1


def test_v_eval_rejects_negative_density():
    m = linear_model(1.0)
    with pytest.raises(ValueError):
        v_eval(m, -0.1)


def test_lagrangian_speed_values():
    m = linear_model(1.0)
    assert V_eval(m, 1.0) == 0.0
    assert V_eval(m, 2.0) == 0.5
    assert V_eval(m, 4.0) == 0.75


def test_V_rejects_gap_below_one():
    with pytest.raises(ValueError):
        V_eval(linear_model(1.0), 0.999)


def test_V_equals_v_of_reciprocal_exactly():
    m = quadratic_model(1.7)
    for y in np.linspace(1.0, 50.0, 211):
        assert V_eval(m, y) == v_eval(m, 1.0 / y)


def test_lipschitz_constant_prototypical():
    # sup |V'| = v_max / y^2 <= v_max, attained at y=1
    for vmax in (1.0, 2.0):
        m = linear_model(vmax)
        q = sampled_lipschitz(m)
        assert lipschitz_constant(m) == vmax
        assert q <= vmax + 1e-12
        assert q > 0.9 * vmax  # the sup really is approached near y=1


def test_lipschitz_is_upper_bound_for_quadratic():
    m = quadratic_model(3.0)
    q = sampled_lipschitz(m)
    assert q <= m.L_v + 1e-9
    # 8 v_max / 27 is attained at y = 3/2, so the sampled max gets close
    assert q > 0.98 * m.L_v


def test_validate_accepts_builtin_models():
    assert validate(linear_model(1.0)) == []
    assert validate(quadratic_model(0.5)) == []


def test_validate_flags_constant_speed_law():
    bad = VelocityModel(
        name="flat", v_max=1.0,
        v=lambda rho: np.full_like(np.asarray(rho, float), 1.0), L_v=1.0,
    )
    problems = validate(bad)
    assert problems
    assert any("rho >= 1" in p.check for p in problems)


def test_validate_accepts_concave_parabola():
    # v(rho) = v_max * max(0, 1 - rho^2): decreasing on [0,1], zero beyond.
    # V(y) = v_max (1 - 1/y^2) has V' = 2 v_max / y^3, so L_v = 2 v_max.
    m = custom_model(
        "concave", 1.0,
        lambda rho: np.maximum(0.0, 1.0 - np.asarray(rho, float) ** 2),
        L_v=2.0,
    )
    assert validate(m) == []


def test_custom_model_rejects_understated_lipschitz():
    with pytest.raises(ValueError):
        custom_model(
            "concave-bad-L", 1.0,
            lambda rho: np.maximum(0.0, 1.0 - np.asarray(rho, float) ** 2),
            L_v=0.5,
        )


def test_custom_model_rejects_increasing_law():
    with pytest.raises(ValueError):
        custom_model(
            "rising", 1.0,
            lambda rho: np.minimum(1.0, np.asarray(rho, float)),
            L_v=1.0,
        )


def test_monotone_lipschitz_property_on_sampled_pairs():
    rng = np.random.default_rng(7)
    for m in (linear_model(1.0), quadratic_model(2.0)):
        y = np.sort(rng.uniform(1.0, 30.0, size=500))
        V = m.v(1.0 / y)
        dV = np.diff(V)
        dy = np.diff(y)
        assert np.all(dV >= -1e-15)
        assert np.all(dV <= m.L_v * dy + 1e-12)
        assert np.all(V <= m.v_max + 1e-15)


def test_model_from_config():
    m = model_from_config({"kind": "quadratic", "v_max": 2.0})
    assert m.v_max == 2.0 and m.name == "quadratic"
    with pytest.raises(ValueError):
        model_from_config({"kind": "cubic"})
    with pytest.raises(ValueError):
        model_from_config({"kind": "linear", "v_max": -1})
