"""Event-driven hybrid integration and the exact apex-to-apex stride map.

The plant side integrates with an adaptive RK45 pair at tight tolerance and
localizes guard crossings with scipy's event machinery.  Flight segments are
ballistic and handled in closed form; only stance needs numerical
integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import slip
from .errors import (
    InfeasibleControlError,
    NoEventError,
    PhaseMismatchError,
    SimulationFault,
)
from .params import ApexState, ControlInput, SlipParams

PLANT_RTOL = 1e-9
PLANT_ATOL = 1e-11
STANCE_TIME_LIMIT = 5.0
MIN_BODY_HEIGHT = 0.2
MAX_PITCH = math.pi / 3


@dataclass(frozen=True)
class Guard:
    """A scalar event function with a crossing direction.

    direction -1 fires on a + to - crossing, +1 on - to +, 0 on either.
    """

    name: str
    fn: Callable[[float, np.ndarray], float]
    direction: int = -1
    terminal: bool = True


@dataclass(frozen=True)
class HybridEvent:
    kind: str
    time: float
    state: tuple[float, ...]


@dataclass
class StrideRecord:
    """Per-stride log of the closed loop."""

    n: int
    apex: ApexState
    control: ControlInput | None
    predicted: ApexState | None
    next_apex: ApexState | None
    error: tuple[float, float] | None
    k_hat: float
    fault: str | None = None
    events: list[HybridEvent] = field(default_factory=list)
    trajectory: list[tuple] = field(default_factory=list)


def integrate_phase(
    x0: Sequence[float],
    deriv: Callable[[float, np.ndarray], Sequence[float]],
    guards: Sequence[Guard],
    t_max: float,
    rtol: float = PLANT_RTOL,
    atol: float = PLANT_ATOL,
    t0: float = 0.0,
):
    """Integrate until the first terminal guard crossing.

    Returns (ts, xs, events, terminal_event) where xs has one state per row.
    Raises NoEventError if no terminal guard fires before t_max and
    PhaseMismatchError if a falling guard is already violated at t0.
    """
    x0 = np.asarray(x0, dtype=float)
    for g in guards:
        if g.terminal and g.direction <= 0 and g.fn(t0, x0) < 0.0:
            raise PhaseMismatchError(f"guard '{g.name}' already active at start")

    event_fns = []
    for g in guards:
        fn = (lambda t, x, _g=g: _g.fn(t, x))
        fn.terminal = g.terminal
        fn.direction = float(g.direction)
        event_fns.append(fn)

    sol = solve_ivp(
        deriv,
        (t0, t0 + t_max),
        x0,
        method="RK45",
        rtol=rtol,
        atol=atol,
        events=event_fns,
        dense_output=False,
    )
    if not sol.success:
        raise SimulationFault(f"integration failed: {sol.message}", time=sol.t[-1])

    events: list[HybridEvent] = []
    terminal_event = None
    for g, te, xe in zip(guards, sol.t_events, sol.y_events):
        for ti, xi in zip(te, xe):
            events.append(HybridEvent(g.name, float(ti), tuple(float(v) for v in xi)))
    events.sort(key=lambda e: e.time)
    if sol.status == 1:
        for e in events:
            if any(g.name == e.kind and g.terminal for g in guards):
                terminal_event = e
                break
    if terminal_event is None:
        raise NoEventError(f"no terminal guard fired within t_max={t_max}")
    return sol.t, sol.y.T, events, terminal_event


def _flight_descend(z0: float, ydot: float, z_target: float) -> tuple[float, float]:
    """Closed-form descent from apex (zdot=0) to height z_target.

    Returns (time of flight, vertical velocity at arrival).
    """
    if z_target > z0:
        raise InfeasibleControlError(
            f"touchdown height {z_target:.4f} above apex height {z0:.4f}"
        )
    t = math.sqrt(2.0 * (z0 - z_target))
    return t, -t


def slip_stance_guards(u: ControlInput) -> list[Guard]:
    return [
        Guard("liftoff", lambda t, x: x[0] - u.r_lo, direction=1, terminal=True),
        Guard("bottom", lambda t, x: x[2], direction=1, terminal=False),
        Guard(
            "fault-low",
            lambda t, x: x[0] * math.cos(x[1]) - MIN_BODY_HEIGHT,
            direction=-1,
            terminal=True,
        ),
        Guard(
            "fault-overshoot",
            lambda t, x: (1.0 + slip.COMPRESSION_OVERSHOOT) - x[0],
            direction=-1,
            terminal=True,
        ),
    ]


def slip_apex_map(
    apex: ApexState,
    u: ControlInput,
    p: SlipParams,
    rtol: float = PLANT_RTOL,
    atol: float = PLANT_ATOL,
    collect: bool = False,
) -> tuple[ApexState, list[HybridEvent], list[tuple]]:
    """Exact apex-to-apex return map of the passive SLIP plant.

    Flight is solved in closed form; stance integrates the polar dynamics
    until the leg re-extends to r_lo.  Raises InfeasibleControlError when the
    commanded touchdown height exceeds the apex, SimulationFault on crashes.
    """
    z_td = u.r_td * math.cos(u.theta_td)
    t_td, zdot_td = _flight_descend(apex.z, apex.ydot, z_td)
    events = [HybridEvent("touchdown", t_td, (apex.z, apex.ydot))]
    traj: list[tuple] = []
    if collect:
        for tf in np.linspace(0.0, t_td, 25):
            traj.append(
                (float(tf), "flight", apex.ydot * tf, apex.z - 0.5 * tf * tf,
                 0.0, apex.ydot, -tf, 0.0, "")
            )

    x_td = slip.touchdown_polar(z_td, apex.ydot, zdot_td, u.theta_td, u.r_td)

    def rhs(t, x):
        return slip.stance_deriv((x[0], x[1], x[2], x[3]), p)

    try:
        ts, xs, ev, term = integrate_phase(
            x_td, rhs, slip_stance_guards(u), STANCE_TIME_LIMIT,
            rtol=rtol, atol=atol, t0=t_td,
        )
    except NoEventError as exc:
        raise SimulationFault("stance exceeded time limit", time=t_td) from exc
    if term.kind != "liftoff":
        raise SimulationFault(f"stance fault: {term.kind}", time=term.time, state=term.state)
    events.extend(ev)

    toe_y = apex.ydot * t_td + u.r_td * math.sin(u.theta_td)
    if collect:
        for ti, xi in zip(ts, xs):
            r, th, dr, dth = xi
            z, ydot, zdot = slip.liftoff_cartesian((r, th, dr, dth))
            traj.append((float(ti), "stance", toe_y - r * math.sin(th), z,
                         0.0, ydot, zdot, 0.0, ""))

    z_lo, ydot_lo, zdot_lo = slip.liftoff_cartesian(term.state)
    if zdot_lo <= 0.0:
        raise SimulationFault("liftoff with downward velocity", time=term.time)

    t_rise = zdot_lo
    z_apex = z_lo + 0.5 * zdot_lo * zdot_lo
    events.append(HybridEvent("apex", term.time + t_rise, (z_apex, ydot_lo)))
    if collect:
        y_lo = toe_y - term.state[0] * math.sin(term.state[1])
        for tf in np.linspace(0.0, t_rise, 25):
            traj.append(
                (float(term.time + tf), "flight", y_lo + ydot_lo * tf,
                 z_lo + zdot_lo * tf - 0.5 * tf * tf, 0.0, ydot_lo,
                 zdot_lo - tf, 0.0, "")
            )
    return ApexState(z=z_apex, ydot=ydot_lo), events, traj
