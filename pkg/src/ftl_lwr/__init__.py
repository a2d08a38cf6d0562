"""Follow-the-leader traffic dynamics and their Eulerian density limit.

A particle system of N vehicles of length ell follows its leader through a
speed law v(rho). Rewritten in the dimensionless gaps y_i = (z_{i+1} - z_i)/ell
the system is a conservative upwind dynamics for the inverse density, and the
piecewise-constant density rebuilt from vehicle positions approximates the
entropy solution of the macroscopic conservation law rho_t + (rho v(rho))_z = 0.

Subpackage map:

    velocity_models   speed laws v(rho), V(y) = v(1/y), Lipschitz data
    ftl_ode           the gap ODE system, RK4 integration, rate residuals
    ftl_euler         the forward-Euler gap scheme (monotone upwind form)
    lagrange_euler    vehicle placement, coordinate maps, density rebuild
    lwr_reference     independent Godunov / upwind / exact-solution oracles
    analysis          L1 metrics, TV, entropy residuals, convergence studies
    cli               simulate / converge / validate commands, CSV emission
"""

from . import (
    analysis,
    cli,
    ftl_euler,
    ftl_ode,
    lagrange_euler,
    lwr_reference,
    velocity_models,
)

__all__ = [
    "analysis",
    "cli",
    "ftl_euler",
    "ftl_ode",
    "lagrange_euler",
    "lwr_reference",
    "velocity_models",
]

__version__ = "0.1.0"
