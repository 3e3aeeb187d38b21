"""Fixed points, numerical linearization, eigenvalue verdicts, and sweeps.

The closed-loop Poincare state is (z, ydot) for the non-adaptive loop and
(z, ydot, rs_hat) when the stiffness estimate is adapting; the hexapod adds
(alpha, alphadot).  All quantities dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .control import AdaptiveConfig, DeadbeatConfig, adaptive_update, prediction_error
from .errors import DivergedError, PronkError
from .loop import StrideController, simulate_strides
from .params import ApexState, SlipParams
from .predictor import PredictiveMap

FIXED_POINT_TOL = 1e-8
MAX_FP_STRIDES = 200
JACOBIAN_STEP = 1e-5
SETTLE_WINDOW = 10
SETTLE_TOL = 1e-6


@dataclass
class StabilityReport:
    fixed_point: tuple[float, ...] | None
    jacobian: np.ndarray | None
    eig_magnitudes: list[float]
    max_eig: float
    stable: bool
    converged: bool
    label: tuple[float, float] = (0.0, 0.0)
    note: str = ""


@dataclass
class SweepPoint:
    parameter: str
    deviation: float
    e_z: float
    e_ydot: float
    reached_fixed_point: bool
    fault: str | None = None


@dataclass
class SweepResult:
    parameter: str
    deviations: list[float]
    points: list[SweepPoint]


def closed_loop_map(
    target: ApexState,
    base_map: PredictiveMap,
    plant,
    deadbeat: DeadbeatConfig,
    adaptive: AdaptiveConfig,
) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    """One-stride map of the closed loop as a plain vector function.

    The vector is (z, ydot [, alpha, alphadot] [, rs_hat]); the stiffness
    slot is present only when adaptation is enabled.  Each evaluation is
    stateless: the controller is rebuilt from the vector.
    """
    plant_dim = plant.state_dim
    dim = plant_dim + (1 if adaptive.enabled else 0)

    def step(v: np.ndarray) -> np.ndarray:
        apex = ApexState(*v[:plant_dim]) if plant_dim == 4 else ApexState(v[0], v[1])
        rs = v[plant_dim] if adaptive.enabled else base_map.params.rs
        fmap = PredictiveMap(
            SlipParams(rs, base_map.params.rb), base_map.step, base_map.offset
        )
        ctrl = StrideController(
            target=target, fmap=fmap, deadbeat=deadbeat, adaptive=adaptive
        )
        u, predicted, _ = ctrl.decide(apex)
        next_apex, _, _ = plant.stride(apex, u, fmap.params)
        out = list(next_apex.planar())
        if plant_dim == 4:
            out += [next_apex.alpha, next_apex.alphadot]
        if adaptive.enabled:
            err = prediction_error(next_apex, predicted)
            rs_next, _ = adaptive_update(rs, apex, err, adaptive)
            out.append(rs_next)
        return np.array(out)

    return step, dim


def find_fixed_point(
    stride_map: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    tol: float = FIXED_POINT_TOL,
    max_strides: int = MAX_FP_STRIDES,
) -> np.ndarray:
    """Iterate the closed-loop map until consecutive apices coincide."""
    v = np.asarray(start, dtype=float)
    for _ in range(max_strides):
        v_next = stride_map(v)
        if float(np.linalg.norm(v_next - v)) < tol:
            return v_next
        v = v_next
    raise DivergedError(
        f"no fixed point within {max_strides} strides", last_iterate=v
    )


def numerical_jacobian(
    fn: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    h: float = JACOBIAN_STEP,
) -> tuple[np.ndarray, bool]:
    """Central-difference Jacobian, column by column.

    Falls back to a one-sided difference (flagging it) for any direction
    where the map faults at a perturbed point.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = None
    n = len(x0)
    cols = []
    one_sided = False
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fp = fm = None
        try:
            fp = fn(x0 + e)
        except PronkError:
            pass
        try:
            fm = fn(x0 - e)
        except PronkError:
            pass
        if fp is not None and fm is not None:
            cols.append((fp - fm) / (2.0 * h))
        elif fp is not None or fm is not None:
            if f0 is None:
                f0 = fn(x0)
            one_sided = True
            cols.append(((fp - f0) / h) if fp is not None else ((f0 - fm) / h))
        else:
            raise DivergedError(f"map faults on both sides of direction {j}")
    return np.column_stack(cols), one_sided


def eig_magnitudes(mat: np.ndarray) -> list[float]:
    """Eigenvalue magnitudes of a small square matrix, sorted descending."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix must be square")
    if mat.shape[0] > 6:
        raise ValueError("intended for small stride-map linearizations (n <= 6)")
    return sorted((float(abs(v)) for v in np.linalg.eigvals(mat)), reverse=True)


def analyze_point(
    stride_map: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    label: tuple[float, float],
    tol: float = FIXED_POINT_TOL,
    h: float = JACOBIAN_STEP,
) -> StabilityReport:
    """find_fixed_point -> numerical_jacobian -> eigenvalue verdict."""
    try:
        fp = find_fixed_point(stride_map, start, tol=tol)
    except (PronkError, ValueError) as exc:
        return StabilityReport(None, None, [], math.nan, False, False, label,
                               note=f"fixed point: {exc}")
    try:
        jac, one_sided = numerical_jacobian(stride_map, fp, h=h)
    except (PronkError, ValueError) as exc:
        return StabilityReport(tuple(fp), None, [], math.nan, False, False, label,
                               note=f"jacobian: {exc}")
    mags = eig_magnitudes(jac)
    return StabilityReport(
        fixed_point=tuple(float(v) for v in fp),
        jacobian=jac,
        eig_magnitudes=mags,
        max_eig=mags[0],
        stable=mags[0] < 1.0,
        converged=True,
        label=label,
        note="one-sided jacobian" if one_sided else "",
    )


def stability_scan_targets(
    targets: Sequence[ApexState],
    map_builder: Callable[[ApexState], tuple[Callable, int]],
    tol: float = FIXED_POINT_TOL,
    h: float = JACOBIAN_STEP,
    rs_start: float | None = None,
) -> list[StabilityReport]:
    """Stability verdict at each dead-beat target on a (z*, ydot*) grid."""
    reports = []
    for tgt in targets:
        stride_map, dim = map_builder(tgt)
        start = [tgt.z, tgt.ydot]
        if dim >= 4:
            start += [0.0, 0.0]
        if dim in (3, 5):
            start.append(rs_start)
        reports.append(
            analyze_point(stride_map, np.array(start), (tgt.z, tgt.ydot), tol, h)
        )
    return reports


def simulate_to_settling(
    target: ApexState,
    controller: StrideController,
    plant,
    max_strides: int = MAX_FP_STRIDES,
    window: int = SETTLE_WINDOW,
    tol: float = SETTLE_TOL,
):
    """Run the closed loop until a settling window (or exhaustion).

    Returns (records, settled_flag).  Settled means the apex state moved
    less than tol in each of the last `window` strides.
    """
    records = simulate_strides(target, controller, plant, max_strides)
    ok = [r for r in records if not r.fault]
    if any(r.fault for r in records):
        return records, False
    states = [r.next_apex for r in ok]
    run = 0
    for i in range(1, len(states)):
        dz = abs(states[i].z - states[i - 1].z)
        dy = abs(states[i].ydot - states[i - 1].ydot)
        run = run + 1 if (dz < tol and dy < tol) else 0
        if run >= window:
            return records[: i + 1], True
    return records, False


def miscalibration_sweep(
    parameter: str,
    deviations: Sequence[float],
    make_controller: Callable[[str, float], StrideController],
    plant,
    target: ApexState,
    max_strides: int = MAX_FP_STRIDES,
    window: int = SETTLE_WINDOW,
    tol: float = SETTLE_TOL,
) -> SweepResult:
    """Steady-state apex errors over a deviation grid of one parameter.

    parameter: stiffness | mass | damping | map-offset.  Deviations are
    fractions (0.05 = +5%).  make_controller builds a fresh controller with
    the deviated estimate (or offset map) per point.
    """
    if parameter not in ("stiffness", "mass", "damping", "map-offset"):
        raise ValueError(f"unknown sweep parameter: {parameter}")
    devs = list(deviations)
    if any(abs(d) > 0.5 for d in devs):
        raise ValueError("sweep grid limited to +/-50%")
    if devs != sorted(devs):
        raise ValueError("deviation grid must be increasing")
    points = []
    for d in devs:
        ctrl = make_controller(parameter, d)
        try:
            records, settled = simulate_to_settling(
                target, ctrl, plant, max_strides, window, tol
            )
        except PronkError as exc:
            points.append(SweepPoint(parameter, d, math.nan, math.nan, False, str(exc)))
            continue
        ok = [r for r in records if not r.fault and r.error is not None]
        if not ok:
            fault = next((r.fault for r in records if r.fault), "no strides")
            points.append(SweepPoint(parameter, d, math.nan, math.nan, False, fault))
            continue
        tail = ok[-min(window, len(ok)):]
        e_z = float(np.mean([r.error[0] for r in tail]))
        e_y = float(np.mean([r.error[1] for r in tail]))
        fault = next((r.fault for r in records if r.fault), None)
        points.append(SweepPoint(parameter, d, e_z, e_y, settled, fault))
    return SweepResult(parameter, devs, points)
