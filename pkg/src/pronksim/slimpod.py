"""Planar hexapod (Slimpod) plant: rigid body with three massless spring legs.

Body state is (y, z, alpha, ydot, zdot, alphadot).  Stance legs pin their
toes to the points commanded at touchdown and transmit an axial
spring-damper force plus a transverse force tau/r; for angular momentum
bookkeeping the transmitted leg force acts at the toe, which is equivalent
to a hip force plus the hip-torque reaction couple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import slip
from .control import EmbeddingController, flight_leg_placement
from .errors import InfeasibleControlError, NoEventError, SimulationFault, SingularConfigurationError
from .hybrid import (
    Guard,
    HybridEvent,
    MAX_PITCH,
    MIN_BODY_HEIGHT,
    PLANT_ATOL,
    PLANT_RTOL,
    STANCE_TIME_LIMIT,
    integrate_phase,
)
from .params import ApexState, ControlInput, SlimpodParams


def _leg_geometry(body, di, toe):
    """(r, er, et, dr, arm) of one stance leg for the current body state."""
    y, z, a, dy, dz, da = body
    hip = (y + di * math.cos(a), z + di * math.sin(a))
    hv = (dy - di * math.sin(a) * da, dz + di * math.cos(a) * da)
    ly, lz = hip[0] - toe[0], hip[1] - toe[1]
    r = math.hypot(ly, lz)
    if r <= 1e-9:
        raise SingularConfigurationError("slimpod leg length collapsed")
    er = (ly / r, lz / r)
    et = (-lz / r, ly / r)
    dr = (ly * hv[0] + lz * hv[1]) / r
    arm = (toe[0] - y, toe[1] - z)
    return r, er, et, dr, arm


def body_deriv(
    body: tuple[float, ...],
    toes: dict[int, tuple[float, float]],
    torques: dict[int, float],
    p: SlimpodParams,
) -> tuple[float, ...]:
    """COM and pitch accelerations from the attached legs (flight if empty)."""
    y, z, a, dy, dz, da = body
    fy = fz = mom = 0.0
    for i, toe in toes.items():
        r, er, et, dr, arm = _leg_geometry(body, p.d[i], toe)
        f_ax = p.rs[i] * (1.0 - r) - p.rb[i] * dr
        f_t = torques.get(i, 0.0) / r
        fyi = f_ax * er[0] + f_t * et[0]
        fzi = f_ax * er[1] + f_t * et[1]
        fy += fyi
        fz += fzi
        mom += arm[0] * fzi - arm[1] * fyi
    return (dy, dz, da, fy, fz - 1.0, mom / p.inertia)


def leg_states(
    body: tuple[float, ...], toes: dict[int, tuple[float, float]], p: SlimpodParams
) -> dict[int, tuple[float, float, float, float]]:
    out = {}
    for i, toe in toes.items():
        r, er, et, dr, arm = _leg_geometry(body, p.d[i], toe)
        out[i] = (r, math.atan2(-er[0], er[1]), dr, 0.0)
    return out


def slimpod_apex_map(
    apex: ApexState,
    u: ControlInput,
    p: SlimpodParams,
    embed: EmbeddingController,
    last_leg_liftoff: bool = True,
    rtol: float = PLANT_RTOL,
    atol: float = PLANT_ATOL,
    collect: bool = False,
) -> tuple[ApexState, list[HybridEvent], list[tuple]]:
    """Exact hexapod apex-to-apex map under the embedding stance controller.

    Stance ends when the last attached leg re-extends to r_lo (or the first,
    when ``last_leg_liftoff`` is false).  Raises SimulationFault for crashes,
    pitch-over, or stance timeout.
    """
    z_td_com = u.r_td * math.cos(u.theta_td)
    if z_td_com > apex.z:
        raise InfeasibleControlError(
            f"touchdown height {z_td_com:.4f} above apex {apex.z:.4f}"
        )
    t_td = math.sqrt(2.0 * (apex.z - z_td_com))
    a_td = apex.alpha + apex.alphadot * t_td
    if abs(a_td) > MAX_PITCH:
        raise SimulationFault("pitch-over during descent", time=t_td)
    body = [apex.ydot * t_td, z_td_com, a_td, apex.ydot, -t_td, apex.alphadot]

    cmds = flight_leg_placement(a_td, u, p)
    toes: dict[int, tuple[float, float]] = {}
    for i, (th_i, r_i) in enumerate(cmds):
        hip = (body[0] + p.d[i] * math.cos(a_td), body[1] + p.d[i] * math.sin(a_td))
        toes[i] = slip.leg_cartesian(hip, r_i, th_i)
    vtoe = (body[0] + u.r_td * math.sin(u.theta_td), 0.0)

    events = [HybridEvent("touchdown", t_td, tuple(body))]
    traj: list[tuple] = []
    if collect:
        for tf in np.linspace(0.0, t_td, 25):
            traj.append((float(tf), "flight", apex.ydot * tf,
                         apex.z - 0.5 * tf * tf, apex.alpha + apex.alphadot * tf,
                         apex.ydot, -tf, apex.alphadot, ""))

    t = t_td
    bottom_seen = False
    while toes:
        # shed legs already extended past r_lo (simultaneous liftoffs)
        for i in list(toes):
            r_i, _, _, dr_i, _ = _leg_geometry(tuple(body), p.d[i], toes[i])
            if r_i >= u.r_lo - 1e-12 and dr_i > 0.0:
                del toes[i]
        if not toes:
            break
        attached = dict(toes)

        def rhs(tt, x):
            torq = embed.torques(tuple(x), attached, p, vtoe)
            return body_deriv(tuple(x), attached, torq, p)

        guards = [
            Guard("fault-low", lambda tt, x: x[1] - MIN_BODY_HEIGHT, -1, True),
            Guard("fault-pitch", lambda tt, x: MAX_PITCH - abs(x[2]), -1, True),
        ]
        for i, toe in attached.items():
            guards.append(
                Guard(
                    f"liftoff-{i}",
                    lambda tt, x, _toe=toe, _d=p.d[i]: _leg_geometry(tuple(x), _d, _toe)[0] - u.r_lo,
                    direction=1,
                    terminal=True,
                )
            )
        if not bottom_seen:
            guards.append(
                Guard("bottom",
                      lambda tt, x: (
                          ((x[0] - vtoe[0]) * x[3] + (x[1] - vtoe[1]) * x[4])
                          / math.hypot(x[0] - vtoe[0], x[1] - vtoe[1])
                      ),
                      direction=1, terminal=False)
            )

        budget = STANCE_TIME_LIMIT - (t - t_td)
        if budget <= 0:
            raise SimulationFault("stance exceeded time limit", time=t)
        try:
            ts, xs, ev, term = integrate_phase(
                body, rhs, guards, budget, rtol=rtol, atol=atol, t0=t
            )
        except NoEventError as exc:
            raise SimulationFault("stance exceeded time limit", time=t) from exc
        if collect:
            for ti, xi in zip(ts, xs):
                traj.append((float(ti), "stance", *(float(v) for v in xi[:3]),
                             *(float(v) for v in xi[3:]), ""))
        for e in ev:
            if e.kind == "bottom":
                bottom_seen = True
        events.extend(ev)
        if term.kind.startswith("fault"):
            raise SimulationFault(f"stance fault: {term.kind}", time=term.time,
                                  state=term.state)
        leg_idx = int(term.kind.split("-")[1])
        body = list(term.state)
        t = term.time
        del toes[leg_idx]
        if not last_leg_liftoff:
            toes.clear()

    y, z, a, dy, dz, da = body
    if dz <= 0.0:
        raise SimulationFault("liftoff with downward velocity", time=t)
    t_rise = dz
    z_apex = z + 0.5 * dz * dz
    a_apex = a + da * t_rise
    if abs(a_apex) > MAX_PITCH:
        raise SimulationFault("pitch-over during ascent", time=t + t_rise)
    events.append(HybridEvent("apex", t + t_rise, (z_apex, dy, a_apex, da)))
    if collect:
        for tf in np.linspace(0.0, t_rise, 25):
            traj.append((float(t + tf), "flight", y + dy * tf,
                         z + dz * tf - 0.5 * tf * tf, a + da * tf,
                         dy, dz - tf, da, ""))
    return ApexState(z=z_apex, ydot=dy, alpha=a_apex, alphadot=da), events, traj
