"""Stride-level and inner-loop controllers.

Contains the dead-beat stride optimizer over the approximate map, the
MIT-rule stiffness update, flight leg placement for the hexapod, and the
stance controller that distributes template forces to per-leg hip torques.
All quantities dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import slip
from .errors import InfeasibleControlError, InfeasiblePlacementError, SimulationFault
from .params import ApexState, ControlInput, SlimpodParams, SlipParams
from .predictor import PredictiveMap

THETA_LIMIT = 1.35  # |theta_td| bound, shy of pi/2
R_MIN = 0.4


@dataclass(frozen=True)
class DeadbeatConfig:
    tolerance: float = 1e-6
    max_iter: int = 40
    fd_step: float = 1e-7
    theta_limit: float = THETA_LIMIT
    r_min: float = R_MIN
    polish_iters: int = 2


@dataclass(frozen=True)
class AdaptiveConfig:
    """Gains and bounds for the stiffness update (dimensionless).

    ``gains`` weight the per-component products state*error; ``signs`` carry
    the measured sign of d(error)/d(stiffness) per apex component so the
    update always descends the squared prediction error.
    """

    gains: tuple[float, float] = (0.6, 0.6)
    signs: tuple[float, float] = (-1.0, -1.0)
    rs_min: float = 0.0
    rs_max: float = float("inf")
    enabled: bool = True

    def __post_init__(self):
        if any(g < 0 for g in self.gains):
            raise ValueError("adaptive gains must be non-negative")
        if not self.rs_min < self.rs_max:
            raise ValueError("stiffness bounds must be ordered")


def prediction_error(realized: ApexState, predicted: ApexState) -> tuple[float, float]:
    """Componentwise apex prediction error (realized minus predicted)."""
    return (realized.z - predicted.z, realized.ydot - predicted.ydot)


def adaptive_update(
    rs_hat: float,
    apex: ApexState,
    error: tuple[float, float],
    cfg: AdaptiveConfig,
) -> tuple[float, bool]:
    """One MIT-rule stiffness step: clamp(rs - sum_j s_j*K_j*X_j*e_j).

    Returns (new estimate, held_flag); the estimate is held when the error is
    non-finite (faulted stride) or adaptation is disabled.
    """
    if not cfg.enabled:
        return rs_hat, False
    if not all(math.isfinite(e) for e in error):
        return rs_hat, True
    x = apex.planar()
    step = sum(cfg.signs[j] * cfg.gains[j] * x[j] * error[j] for j in range(2))
    return min(max(rs_hat - step, cfg.rs_min), cfg.rs_max), False


def measure_sensitivity_signs(
    fmap: PredictiveMap, apex: ApexState, u: ControlInput
) -> tuple[float, float]:
    """Signs of d(error)/d(stiffness) at an operating point.

    The prediction error depends on the estimate only through the map, so
    sign(de_j/drs) = -sign(d(prediction_j)/drs).
    """
    grad, _ = fmap.sensitivity(apex, u)
    return tuple(-math.copysign(1.0, g) for g in grad)


def _clip_input(v: np.ndarray, z: float, cfg: DeadbeatConfig) -> np.ndarray:
    th = float(np.clip(v[0], -cfg.theta_limit, cfg.theta_limit))
    r_td = float(np.clip(v[1], cfg.r_min, 1.0))
    r_lo = float(np.clip(v[2], cfg.r_min, 1.0))
    # keep the commanded touchdown height below the current apex
    max_rtd = (z - 1e-9) / max(math.cos(th), 1e-9)
    r_td = min(r_td, max_rtd)
    if r_td < cfg.r_min:
        raise InfeasibleControlError("no feasible touchdown below current apex")
    return np.array([th, r_td, r_lo])


def deadbeat_solve(
    apex: ApexState,
    target: ApexState,
    fmap: PredictiveMap,
    cfg: DeadbeatConfig = DeadbeatConfig(),
    guess: ControlInput | None = None,
) -> tuple[ControlInput, bool]:
    """Stride input driving the predicted next apex to the target.

    Damped Gauss-Newton on the least-squares residual of the approximate
    map, with a finite-difference input Jacobian and bound clipping.
    Returns (input, converged); the best-found input is returned either way.
    """
    if guess is None:
        guess = ControlInput(0.45 * math.copysign(1.0, target.ydot or 1.0), 0.85, 1.0)
    v = _clip_input(np.array(guess.as_tuple()), apex.z, cfg)
    goal = np.array(target.planar())

    def residual(vec) -> np.ndarray | None:
        try:
            pred = fmap.predict(apex, ControlInput(*vec))
        except (InfeasibleControlError, SimulationFault, ValueError):
            return None
        return np.array(pred.planar()) - goal

    r = residual(v)
    if r is None:
        raise InfeasibleControlError("initial stride guess infeasible")
    best_v, best_norm = v.copy(), float(np.linalg.norm(r))
    converged = False
    polish_left = cfg.polish_iters

    for _ in range(cfg.max_iter):
        norm = float(np.linalg.norm(r))
        if norm < best_norm:
            best_v, best_norm = v.copy(), norm
        if norm < cfg.tolerance:
            converged = True
            if polish_left <= 0 or norm < 1e-13:
                break
            polish_left -= 1

        jac = np.zeros((2, 3))
        ok = True
        for j in range(3):
            h = cfg.fd_step * max(1.0, abs(v[j]))
            vp, vm = v.copy(), v.copy()
            vp[j] += h
            vm[j] -= h
            try:
                vp = _clip_input(vp, apex.z, cfg)
                vm = _clip_input(vm, apex.z, cfg)
            except InfeasibleControlError:
                ok = False
                break
            rp, rm = residual(vp), residual(vm)
            if rp is None or rm is None:
                ok = False
                break
            denom = vp[j] - vm[j]
            if denom == 0.0:
                ok = False
                break
            jac[:, j] = (rp - rm) / denom
        if not ok:
            break

        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        accepted = False
        for _bt in range(8):
            try:
                v_new = _clip_input(v + step, apex.z, cfg)
            except InfeasibleControlError:
                step *= 0.5
                continue
            r_new = residual(v_new)
            if r_new is not None and np.linalg.norm(r_new) < norm:
                v, r = v_new, r_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

    if float(np.linalg.norm(r)) <= best_norm:
        best_v, best_norm = v, float(np.linalg.norm(r))
    converged = converged or best_norm < cfg.tolerance
    return ControlInput(*best_v), converged


def flight_leg_placement(
    alpha: float,
    u: ControlInput,
    p: SlimpodParams,
) -> list[tuple[float, float]]:
    """Commanded (theta_i, r_i) per leg so the virtual leg lands at (theta_td, r_td).

    Evaluated at the predicted touchdown pose: each toe is offset from its
    hip by the same vector that separates the virtual toe from the COM, so
    the virtual leg (COM to ground) realizes the stride input exactly.
    """
    off_y = u.r_td * math.sin(u.theta_td)
    off_z = -u.r_td * math.cos(u.theta_td)
    cmds = []
    for di in p.d:
        hip = (di * math.cos(alpha), di * math.sin(alpha))
        toe = (hip[0] + off_y, hip[1] + off_z)
        r = math.hypot(toe[0] - hip[0], toe[1] - hip[1])
        if r <= 0 or toe[1] >= hip[1]:
            raise InfeasiblePlacementError(f"leg at offset {di} cannot reach command")
        th = math.atan2(toe[0] - hip[0], hip[1] - toe[1])
        cmds.append((th, r))
    return cmds


@dataclass
class EmbeddingController:
    """Stance torque distribution forcing the body COM onto template dynamics.

    The template net force (from the controller's estimates, evaluated on
    the virtual leg) plus a pitch-regulation moment is realized through the
    transverse leg forces; the axial spring forces are predicted with the
    same estimates and compensated.  Minimum-norm least squares handles
    rank deficiency; the flag records when it was degenerate.
    """

    template: SlipParams
    leg_rs: tuple[float, ...]
    leg_rb: tuple[float, ...]
    kp_pitch: float = 8.0
    kd_pitch: float = 4.0
    degenerate: bool = False

    def torques(
        self,
        body: tuple[float, float, float, float, float, float],
        toes: dict[int, tuple[float, float]],
        p: SlimpodParams,
        vtoe: tuple[float, float],
    ) -> dict[int, float]:
        y, z, a, dy, dz, da = body
        uy, uz = y - vtoe[0], z - vtoe[1]
        r_v = math.hypot(uy, uz)
        er_v = (uy / r_v, uz / r_v)
        dr_v = (uy * dy + uz * dz) / r_v
        f_mag = self.template.rs * (1.0 - r_v) - self.template.rb * dr_v
        f_des = (f_mag * er_v[0], f_mag * er_v[1])
        m_des = -self.kp_pitch * a - self.kd_pitch * da

        cols, bal_f = [], [f_des[0], f_des[1], m_des]
        idx = sorted(toes)
        for i in idx:
            ty, tz = toes[i]
            hip = (y + p.d[i] * math.cos(a), z + p.d[i] * math.sin(a))
            hv = (dy - p.d[i] * math.sin(a) * da, dz + p.d[i] * math.cos(a) * da)
            ly, lz = hip[0] - ty, hip[1] - tz
            r = math.hypot(ly, lz)
            er = (ly / r, lz / r)
            et = (-lz / r, ly / r)
            dr = (ly * hv[0] + lz * hv[1]) / r
            f_ax = self.leg_rs[i] * (1.0 - r) - self.leg_rb[i] * dr
            arm = (ty - y, tz - z)
            bal_f[0] -= f_ax * er[0]
            bal_f[1] -= f_ax * er[1]
            bal_f[2] -= arm[0] * f_ax * er[1] - arm[1] * f_ax * er[0]
            cols.append([et[0], et[1], arm[0] * et[1] - arm[1] * et[0]])

        a_mat = np.array(cols).T
        sol, _, rank, _ = np.linalg.lstsq(a_mat, np.array(bal_f), rcond=None)
        if rank < min(a_mat.shape):
            self.degenerate = True
        out = {}
        for i, ui in zip(idx, sol):
            ty, tz = toes[i]
            hip = (y + p.d[i] * math.cos(a), z + p.d[i] * math.sin(a))
            r = math.hypot(hip[0] - ty, hip[1] - tz)
            out[i] = float(ui) * r
        return out
