"""Approximate apex return map used inside the controller.

Predicts the next apex by simulating the ideal SLIP template with the
controller's parameter estimates.  The integrator is a fixed-step RK4 with
cubic-Hermite event refinement: markedly coarser than the plant integrator
(so predictions differ slightly from the exact map even with matched
parameters) but smooth in its inputs, which the dead-beat solver and the
numerical stability analysis both rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import slip
from .errors import InfeasibleControlError, SimulationFault
from .params import ApexState, ControlInput, SlipParams

DEFAULT_STEP = 0.01
STANCE_TIME_LIMIT = 5.0


def _stance_step(x, h, rs, rb):
    """One classic RK4 step of the passive stance dynamics."""

    def f(s):
        r, th, dr, dth = s
        rdd = r * dth * dth + rs * (1.0 - r) - math.cos(th) - rb * dr
        thdd = (math.sin(th) - 2.0 * dr * dth) / r
        return (dr, dth, rdd, thdd)

    k1 = f(x)
    k2 = f(tuple(x[i] + 0.5 * h * k1[i] for i in range(4)))
    k3 = f(tuple(x[i] + 0.5 * h * k2[i] for i in range(4)))
    k4 = f(tuple(x[i] + h * k3[i] for i in range(4)))
    return tuple(
        x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(4)
    ), k1


def _hermite(x0, x1, f0, f1, h, s):
    """Cubic Hermite interpolant of the state at fraction s of the step."""
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return tuple(
        h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i] for i in range(4)
    )


def _stance_deriv_raw(x, rs, rb):
    r, th, dr, dth = x
    rdd = r * dth * dth + rs * (1.0 - r) - math.cos(th) - rb * dr
    thdd = (math.sin(th) - 2.0 * dr * dth) / r
    return (dr, dth, rdd, thdd)


def _refine_liftoff(x0, x1, f0, f1, h, r_lo):
    """Locate r(s) = r_lo inside a step by bisection on the Hermite cubic."""
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        xm = _hermite(x0, x1, f0, f1, h, mid)
        if xm[0] < r_lo:
            lo = mid
        else:
            hi = mid
    return _hermite(x0, x1, f0, f1, h, 0.5 * (lo + hi))


def simulate_stance(
    x_td: tuple[float, float, float, float],
    p: SlipParams,
    r_lo: float,
    h: float = DEFAULT_STEP,
) -> tuple[float, float, float, float]:
    """Integrate stance from touchdown until the leg re-extends to r_lo."""
    x = x_td
    f_prev = _stance_deriv_raw(x, p.rs, p.rb)
    t = 0.0
    while t < STANCE_TIME_LIMIT:
        x_new, _ = _stance_step(x, h, p.rs, p.rb)
        if x_new[0] <= 0.05:
            raise SimulationFault("leg collapsed in predictor stance", time=t)
        f_new = _stance_deriv_raw(x_new, p.rs, p.rb)
        if x[0] < r_lo and x_new[0] >= r_lo and x_new[2] > 0.0:
            return _refine_liftoff(x, x_new, f_prev, f_new, h, r_lo)
        x, f_prev = x_new, f_new
        t += h
    raise SimulationFault("predictor stance exceeded time limit", time=t)


@dataclass
class PredictiveMap:
    """The controller's internal model f-hat of the stride map.

    ``params`` is the dimensionless template the controller believes in; the
    adaptive layer mutates its stiffness between strides.  ``offset`` adds a
    constant bias to the prediction (used by the map-offset experiments).
    """

    params: SlipParams
    step: float = DEFAULT_STEP
    offset: tuple[float, float] = (0.0, 0.0)

    def predict(self, apex: ApexState, u: ControlInput) -> ApexState:
        """Predicted next apex (z, ydot) for stride input u."""
        z_td = u.r_td * math.cos(u.theta_td)
        if z_td > apex.z:
            raise InfeasibleControlError(
                f"touchdown height {z_td:.4f} above apex {apex.z:.4f}"
            )
        zdot_td = -math.sqrt(2.0 * (apex.z - z_td))
        x_td = slip.touchdown_polar(z_td, apex.ydot, zdot_td, u.theta_td, u.r_td)
        x_lo = simulate_stance(x_td, self.params, u.r_lo, self.step)
        z_lo, ydot_lo, zdot_lo = slip.liftoff_cartesian(x_lo)
        if zdot_lo <= 0.0:
            raise SimulationFault("predicted liftoff with downward velocity")
        return ApexState(
            z=z_lo + 0.5 * zdot_lo * zdot_lo + self.offset[0],
            ydot=ydot_lo + self.offset[1],
        )

    def sensitivity(
        self, apex: ApexState, u: ControlInput, delta: float = 1e-3
    ) -> tuple[tuple[float, float], bool]:
        """d(prediction)/d(stiffness) by central difference.

        Returns (gradient, one_sided_flag); falls back to a one-sided
        difference if one perturbed prediction is infeasible.
        """
        rs = self.params.rs
        hi = PredictiveMap(SlipParams(rs * (1 + delta), self.params.rb), self.step)
        lo = PredictiveMap(SlipParams(rs * (1 - delta), self.params.rb), self.step)
        base = None
        try:
            xp = hi.predict(apex, u)
        except (InfeasibleControlError, SimulationFault):
            xp = None
        try:
            xm = lo.predict(apex, u)
        except (InfeasibleControlError, SimulationFault):
            xm = None
        if xp is not None and xm is not None:
            den = 2.0 * delta * rs
            return ((xp.z - xm.z) / den, (xp.ydot - xm.ydot) / den), False
        base = self.predict(apex, u)
        den = delta * rs
        if xp is not None:
            return ((xp.z - base.z) / den, (xp.ydot - base.ydot) / den), True
        if xm is not None:
            return ((base.z - xm.z) / den, (base.ydot - xm.ydot) / den), True
        raise InfeasibleControlError("both stiffness perturbations infeasible")
