"""SLIP template dynamics and leg kinematics (dimensionless units).

Conventions: the leg angle theta is measured from the downward vertical and
is positive when the toe is ahead of the hip in the direction of travel, so
the COM sits at ``toe + r*(-sin(theta), cos(theta))`` and the touchdown
height is ``r_td*cos(theta_td)``.

Flight:  y'' = 0,  z'' = -1
Stance:  r''      = r*th'^2 + rs*(1 - r) - cos(th) - rb*r'
         r^2*th'' = sin(th)*r - 2*r*r'*th' + tau
"""

from __future__ import annotations

import math

from .errors import OutOfWorkspaceError, PhaseMismatchError, SingularConfigurationError
from .params import SlipParams

#: leg may overshoot its rest length by this much before we call it a fault
COMPRESSION_OVERSHOOT = 0.05


def flight_deriv(state: tuple[float, float, float, float]) -> tuple[float, float, float, float]:
    """Ballistic derivative of the flight state (y, z, ydot, zdot)."""
    y, z, ydot, zdot = state
    if z <= 0:
        raise PhaseMismatchError(f"flight state below ground: z={z}")
    return (ydot, zdot, 0.0, -1.0)


def stance_deriv(
    state: tuple[float, float, float, float],
    p: SlipParams,
    tau: float = 0.0,
) -> tuple[float, float, float, float]:
    """Derivative of the stance state (r, theta, rdot, thetadot)."""
    r, th, dr, dth = state
    if r <= 0:
        raise SingularConfigurationError(f"leg length collapsed: r={r}")
    rdd = r * dth * dth + p.rs * (1.0 - r) - math.cos(th) - p.rb * dr
    thdd = (math.sin(th) - 2.0 * dr * dth + tau / r) / r
    return (dr, dth, rdd, thdd)


def stance_energy(state: tuple[float, float, float, float], p: SlipParams) -> float:
    """Total mechanical energy in stance (kinetic + gravity + spring)."""
    r, th, dr, dth = state
    return 0.5 * (dr * dr + r * r * dth * dth) + r * math.cos(th) + 0.5 * p.rs * (1.0 - r) ** 2


def flight_energy(z: float, ydot: float, zdot: float) -> float:
    return 0.5 * (ydot * ydot + zdot * zdot) + z


def leg_polar(
    hip: tuple[float, float],
    toe: tuple[float, float],
    hip_vel: tuple[float, float] | None = None,
) -> tuple[float, float, float, float]:
    """Leg length/angle (and rates, toe stationary) from hip and toe points."""
    uy = hip[0] - toe[0]
    uz = hip[1] - toe[1]
    r = math.hypot(uy, uz)
    if r == 0.0:
        raise SingularConfigurationError("hip and toe coincide")
    if uz <= 0.0:
        raise OutOfWorkspaceError("toe at or above hip height")
    th = math.atan2(-uy, uz)
    if hip_vel is None:
        return (r, th, 0.0, 0.0)
    dr = (uy * hip_vel[0] + uz * hip_vel[1]) / r
    dth = (uy * hip_vel[1] - hip_vel[0] * uz) / (r * r)
    return (r, th, dr, dth)


def leg_cartesian(hip: tuple[float, float], r: float, th: float) -> tuple[float, float]:
    """Toe position for a leg of length r at angle th hanging from hip."""
    if r <= 0:
        raise SingularConfigurationError(f"non-positive leg length: {r}")
    return (hip[0] + r * math.sin(th), hip[1] - r * math.cos(th))


def touchdown_polar(
    z: float, ydot: float, zdot: float, theta_td: float, r_td: float
) -> tuple[float, float, float, float]:
    """Convert a flight state at touchdown into stance polar coordinates."""
    s, c = math.sin(theta_td), math.cos(theta_td)
    dr = -ydot * s + zdot * c
    dth = -(ydot * c + zdot * s) / r_td
    return (r_td, theta_td, dr, dth)


def liftoff_cartesian(
    state: tuple[float, float, float, float]
) -> tuple[float, float, float]:
    """Flight (z, ydot, zdot) right after leaving stance polar coordinates."""
    r, th, dr, dth = state
    z = r * math.cos(th)
    ydot = -dr * math.sin(th) - r * dth * math.cos(th)
    zdot = dr * math.cos(th) - r * dth * math.sin(th)
    return (z, ydot, zdot)
