"""Step functions, the mass-to-road maps, density reconstruction, placement."""

import numpy as np
import pytest

from ftl_lwr.ftl_ode import LagrangianState, Leader, Periodic, positions_from_state
from ftl_lwr.lagrange_euler import (
    PiecewiseConstant,
    PiecewiseConstantDensity,
    eulerian_density,
    lagrangian_profile,
    place_vehicles,
    rho0_from_config,
    x_inverse,
    z_map,
)


def make_state(y, boundary, ell=0.5, z1=0.0):
    return LagrangianState(t=0.0, ell=ell, z1=z1, y=np.asarray(y, float), boundary=boundary)


# ------------------------------------------------------------ step functions


def test_step_function_half_open_cells():
    f = PiecewiseConstant(edges=np.array([0.0, 0.5, 1.0]), values=np.array([2.0, 4.0]))
    assert f(0.5) == 2.0  # right edge belongs to its cell
    assert f(0.7) == 4.0
    assert f(1.0) == 4.0
    assert f(0.0) == 2.0  # left end of the domain folds into the first cell
    assert f.total_variation() == 2.0


def test_step_function_rejects_outside_without_extension():
    f = PiecewiseConstant(edges=np.array([0.0, 1.0]), values=np.array([1.0]))
    with pytest.raises(ValueError):
        f(1.5)
    with pytest.raises(ValueError):
        f(np.array([0.5, -0.1]))


def test_step_function_constant_extension():
    f = PiecewiseConstant(
        edges=np.array([0.0, 1.0]), values=np.array([0.5]), extension=(0.0, 0.25)
    )
    assert f(-3.0) == 0.0
    assert f(7.0) == 0.25
    assert f(0.4) == 0.5


def test_step_function_periodic_extension():
    f = PiecewiseConstant(
        edges=np.array([0.0, 0.5, 1.0]),
        values=np.array([2.0, 4.0]),
        extension="periodic",
    )
    assert f(1.2) == f(0.2) == 2.0
    assert f(-0.3) == f(0.7) == 4.0
    assert f(0.0) == 4.0  # left edge wraps onto the last cell
    assert f.total_variation() == 4.0  # jump at the seam counts


def test_step_function_shape_validation():
    with pytest.raises(ValueError):
        PiecewiseConstant(edges=np.array([0.0, 1.0, 0.5]), values=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        PiecewiseConstant(edges=np.array([0.0, 1.0]), values=np.array([1.0, 2.0]))


def test_density_values_gate():
    PiecewiseConstantDensity(edges=np.array([0.0, 1.0]), values=np.array([1.0]))
    with pytest.raises(ValueError):
        PiecewiseConstantDensity(edges=np.array([0.0, 1.0]), values=np.array([0.0]))
    with pytest.raises(ValueError):
        PiecewiseConstantDensity(edges=np.array([0.0, 1.0]), values=np.array([1.0 + 1e-9]))


def test_lagrangian_profile_lives_on_mass_grid():
    s = make_state([2.0, 4.0], Leader(M=4.0), ell=0.5)
    prof = lagrangian_profile(s)
    assert np.array_equal(prof.edges, [0.0, 0.5, 1.0])
    assert prof(0.3) == 2.0 and prof(0.8) == 4.0


# -------------------------------------------------------- mass <-> road maps


def test_z_map_midpoint_and_slope():
    s = make_state([2.0], Leader(M=2.0), ell=0.5, z1=0.0)
    assert z_map(s, 0.0) == 0.0
    assert z_map(s, 0.25) == 0.5  # slope dz/dx = y_1 = 2
    assert z_map(s, 0.5) == 1.0
    with pytest.raises(ValueError):
        z_map(s, 0.51)


def test_x_inverse_is_the_inverse():
    s = make_state([2.0], Leader(M=2.0), ell=0.5, z1=0.0)
    assert x_inverse(s, 0.5) == 0.25
    with pytest.raises(ValueError):
        x_inverse(s, 1.1)


def test_map_roundtrip_random_state():
    rng = np.random.default_rng(13)
    y = rng.uniform(1.0, 5.0, size=60)
    s = make_state(y, Leader(M=2.0), ell=0.25, z1=-3.0)
    x = rng.uniform(0.0, 0.25 * 60, size=1000)
    back = x_inverse(s, z_map(s, x))
    assert np.max(np.abs(back - x)) <= 1e-12


# ------------------------------------------------------------ reconstruction


def test_density_leader_cells_and_extension():
    s = make_state([2.0, 2.0], Leader(M=4.0), ell=0.5)
    rho = eulerian_density(s)
    assert np.array_equal(rho.edges, [0.0, 1.0, 2.0])
    assert np.array_equal(rho.values, [0.5, 0.5])
    assert rho(-5.0) == 0.0  # vacuum upstream of the last vehicle
    assert rho(9.0) == 0.25  # leader headway density 1/M downstream


def test_density_cell_masses_equal_ell():
    rng = np.random.default_rng(17)
    y = rng.uniform(1.0, 5.0, size=30)
    s = make_state(y, Leader(M=3.0), ell=0.2)
    rho = eulerian_density(s)
    masses = np.diff(rho.edges) * rho.values
    assert masses == pytest.approx(np.full(30, 0.2), abs=1e-13)


def test_density_periodic_equal_spacing_is_constant():
    s = make_state([1.5] * 7, Periodic(a=0.0, b=0.25 * 8 * 1.5), ell=0.25)
    rho = eulerian_density(s)
    assert rho.values == pytest.approx(np.full(rho.values.size, 1 / 1.5), abs=1e-13)
    assert rho.edges[0] == 0.0 and rho.edges[-1] == pytest.approx(3.0)


def test_density_periodic_seam_split():
    # z1=0.5 pushes the wrap cell across b=4: it reappears as (0, 0.5]
    s = make_state([2.0, 4.0], Periodic(a=0.0, b=4.0), ell=0.5, z1=0.5)
    rho = eulerian_density(s)
    assert rho.edges[0] == 0.0 and rho.edges[-1] == 4.0
    # total mass is N*ell: 3 vehicles -> 3 quanta of 0.5
    mass = float((np.diff(rho.edges) * rho.values).sum())
    assert mass == pytest.approx(1.5, abs=1e-13)
    assert rho(0.25) == pytest.approx(0.5)  # the split wrap cell, density 1/2
    assert rho(2.5) == pytest.approx(0.25)


# ----------------------------------------------------------- initial density


def test_rho0_config_kinds():
    const = rho0_from_config({"kind": "constant", "value": 0.3})
    assert np.array_equal(const(np.array([0.0, 5.0])), [0.3, 0.3])
    cos = rho0_from_config({"kind": "cosine", "offset": 0.5, "amplitude": 0.5})
    assert cos(0.0) == 1.0 and cos(1.0) == pytest.approx(0.0, abs=1e-15)
    rie = rho0_from_config({"kind": "riemann", "left": 0.2, "right": 0.8, "split": 1.0})
    assert np.array_equal(rie(np.array([0.0, 1.0, 2.0])), [0.2, 0.8, 0.8])


def test_rho0_config_validation():
    with pytest.raises(ValueError):
        rho0_from_config({"kind": "constant", "value": 1.2})
    with pytest.raises(ValueError):
        rho0_from_config({"kind": "cosine", "offset": 0.8, "amplitude": 0.3})
    with pytest.raises(ValueError):
        rho0_from_config({"kind": "riemann", "left": -0.1, "right": 0.5})
    with pytest.raises(ValueError):
        rho0_from_config({"kind": "parabola"})


# ------------------------------------------------------------------ placement


def test_place_constant_leader():
    rho0 = rho0_from_config({"kind": "constant", "value": 0.5})
    s = place_vehicles(rho0, (0.0, 1.0), N=3, mode=Leader(M=2.0))
    assert s.ell == pytest.approx(0.25, abs=1e-15)
    assert positions_from_state(s) == pytest.approx([0.0, 0.5, 1.0], abs=1e-12)
    assert s.y == pytest.approx([2.0, 2.0], abs=1e-12)


def test_place_cosine_periodic_matches_cumulative_mass():
    rho0 = rho0_from_config({"kind": "cosine", "offset": 0.5, "amplitude": 0.5})
    s = place_vehicles(rho0, (-1.0, 1.0), N=4, mode=Periodic(a=-1.0, b=1.0))
    assert s.ell == pytest.approx(0.25, abs=1e-12)  # total mass 1 over 4 cells
    z = positions_from_state(s)
    assert z[0] == -1.0
    F = 0.5 * (z + 1.0) + np.sin(np.pi * z) / (2 * np.pi)
    assert F == pytest.approx(0.25 * np.arange(4), abs=1e-10)


def test_place_gap_ceiling_tracks_density_floor():
    # min density 0.2 -> largest reconstructed gap approaches 1/0.2 = 5
    rho0 = rho0_from_config({"kind": "cosine", "offset": 0.5, "amplitude": 0.3})
    for N in (20, 80, 320):
        s = place_vehicles(rho0, (-1.0, 1.0), N=N, mode=Periodic(a=-1.0, b=1.0))
        assert float(s.y.max()) <= 5.0 + 1e-6
    assert float(s.y.max()) == pytest.approx(5.0, rel=1e-3)


def test_place_vacuum_point_gap_growth():
    # a profile touching zero: the widest gap scales like N^(2/3) against
    # ell ~ 1/N, so the max stored gap grows by about 2^(2/3) per doubling
    rho0 = rho0_from_config({"kind": "cosine", "offset": 0.5, "amplitude": 0.5})
    tops = []
    for N in (40, 80, 160, 320):
        s = place_vehicles(rho0, (-1.0, 1.0), N=N, mode=Periodic(a=-1.0, b=1.0))
        tops.append(float(s.y.max()))
    ratios = np.diff(np.log2(tops))
    assert np.all(ratios > 0.5) and np.all(ratios < 0.85)  # ideal 2/3


def test_place_rejections():
    vac = rho0_from_config({"kind": "riemann", "left": 0.0, "right": 0.5, "split": 0.0})
    with pytest.raises(ValueError, match="vanishes"):
        place_vehicles(vac, (-1.0, 1.0), N=5, mode=Leader(M=2.0))
    with pytest.raises(ValueError):
        place_vehicles(lambda z: 1.2 + 0.0 * np.asarray(z), (0.0, 1.0), N=5, mode=Leader(M=2.0))
    ok = rho0_from_config({"kind": "constant", "value": 0.5})
    with pytest.raises(ValueError, match="domain"):
        place_vehicles(ok, (0.0, 1.0), N=5, mode=Periodic(a=0.0, b=2.0))
    with pytest.raises(ValueError):
        place_vehicles(ok, (1.0, 0.0), N=5, mode=Leader(M=2.0))
    with pytest.raises(ValueError):
        place_vehicles(ok, (0.0, 1.0), N=1, mode=Leader(M=2.0))
