"""Experiment orchestration, CSV/SVG artifacts, run archives, and replay.

All numeric CSV cells are written with ``repr`` so identical runs produce
bitwise-identical files; SVG plots are presentation-only and excluded from
the replay comparison.
"""

from __future__ import annotations

import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    SweepPoint,
    SweepResult,
    analyze_point,
    closed_loop_map,
    miscalibration_sweep,
    simulate_to_settling,
)
from .config import ExperimentConfig, parse_config
from .control import AdaptiveConfig
from .errors import ConfigError, PronkError
from .hybrid import StrideRecord
from .loop import SlimpodPlant, SlipPlant, StrideController, simulate_strides
from .params import ApexState, ParamEstimate, SlipParams
from .predictor import PredictiveMap

STRIDES_HEADER = ("n,z,ydot,alpha,alphadot,theta_td,r_td,r_lo,"
                  "z_pred,ydot_pred,e_z,e_ydot,k_hat,fault")
TRAJECTORY_HEADER = "t,phase,y,z,alpha,ydot,zdot,alphadot,event"
SWEEP_HEADER = "parameter,deviation,adaptation,e_z,e_ydot,reached_fixed_point,fault"
STABILITY_HEADER = ("mode,apex_height,forward_speed,stiffness_factor,gain,"
                    "converged,max_eig,stable,note")
REPLAY_FILES = ("strides.csv", "trajectory.csv", "sweep.csv", "stability.csv")


def fmt(x: float) -> str:
    """Shortest round-tripping decimal form; empty for NaN cells."""
    x = float(x)
    return "" if math.isnan(x) else repr(x)


# --------------------------------------------------------------------------
# Loop construction from a config
# --------------------------------------------------------------------------

def build_plant(cfg: ExperimentConfig):
    p = cfg.plant_params()
    rtol = cfg.num("simulation", "rtol")
    atol = cfg.num("simulation", "atol")
    if cfg.plant_kind == "slimpod":
        return SlimpodPlant(
            p.slimpod(),
            kp_pitch=cfg.num("embedding", "kp_pitch"),
            kd_pitch=cfg.num("embedding", "kd_pitch"),
            last_leg_liftoff=cfg.flag("embedding", "last_leg_liftoff"),
            rtol=rtol, atol=atol,
        )
    return SlipPlant(p.template(), rtol=rtol, atol=atol)


def build_controller(
    cfg: ExperimentConfig,
    estimate: ParamEstimate | None = None,
    adaptation: bool | None = None,
    map_offset: tuple[float, float] = (0.0, 0.0),
) -> StrideController:
    """Controller from config, optionally overriding estimate/adaptation."""
    p = cfg.plant_params()
    est = estimate if estimate is not None else cfg.estimate()
    believed = est.template(p.g)
    target = cfg.target()
    frac = (cfg.num("predictor", "offset_z_frac"),
            cfg.num("predictor", "offset_ydot_frac"))
    offset = (map_offset[0] + frac[0] * target.z,
              map_offset[1] + frac[1] * target.ydot)
    fmap = PredictiveMap(believed, step=cfg.num("predictor", "step"), offset=offset)
    adaptive = cfg.adaptive(believed.rs)
    if adaptation is not None:
        adaptive = AdaptiveConfig(
            gains=adaptive.gains, signs=adaptive.signs,
            rs_min=adaptive.rs_min, rs_max=adaptive.rs_max, enabled=adaptation,
        )
    ctrl = StrideController(target=target, fmap=fmap,
                            deadbeat=cfg.deadbeat(), adaptive=adaptive)
    if adaptive.enabled:
        ctrl.calibrate_signs()
    return ctrl


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------

def run_single(cfg: ExperimentConfig, collect: bool = False) -> list[StrideRecord]:
    controller = build_controller(cfg)
    plant = build_plant(cfg)
    return simulate_strides(cfg.target(), controller, plant,
                            cfg.integer("experiment", "strides"), collect)


def _sweep_point(args) -> tuple[int, SweepPoint]:
    idx, ini, parameter, deviation, adapt = args
    cfg = parse_config(ini)
    plant = build_plant(cfg)
    target = cfg.target()

    def make(param: str, d: float) -> StrideController:
        est = cfg.estimate()
        offset = (0.0, 0.0)
        if param == "stiffness":
            est = ParamEstimate(est.k_hat * (1.0 + d), est.b_hat, est.m_hat, est.l0_hat)
        elif param == "mass":
            est = ParamEstimate(est.k_hat, est.b_hat, est.m_hat * (1.0 + d), est.l0_hat)
        elif param == "damping":
            est = ParamEstimate(est.k_hat, est.b_hat * (1.0 + d), est.m_hat, est.l0_hat)
        else:  # map-offset
            offset = (d * target.z, d * target.ydot)
        return build_controller(cfg, estimate=est, adaptation=adapt,
                                map_offset=offset)

    result = miscalibration_sweep(
        parameter, [deviation], make, plant, target,
        max_strides=cfg.integer("sweep", "max_strides"),
        window=cfg.integer("sweep", "settle_window"),
        tol=cfg.num("sweep", "settle_tol"),
    )
    return idx, result.points[0]


def run_sweep(cfg: ExperimentConfig, workers: int = 1):
    """All (parameter, deviation, adaptation) points, in deterministic order.

    Returns a list of (adaptation_flag, SweepPoint).
    """
    grid = cfg.sweep_grid()
    modes = {"off": [False], "on": [True], "both": [False, True]}
    adapts = modes[cfg.text("sweep", "adaptation")]
    ini = cfg.to_ini()
    jobs = []
    for param in cfg.sweep_parameters():
        for adapt in adapts:
            for d in grid:
                jobs.append((len(jobs), ini, param, d, adapt))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_sweep_point, jobs))
        done.sort(key=lambda pair: pair[0])
        points = [pt for _, pt in done]
    else:
        points = [_sweep_point(job)[1] for job in jobs]
    return [(job[4], pt) for job, pt in zip(jobs, points)]


def _stability_point(args):
    idx, ini, mode, spec = args
    cfg = parse_config(ini)
    plant = build_plant(cfg)
    p = cfg.plant_params()
    sc = p.scale
    h = cfg.num("stability", "jacobian_step")
    tol = cfg.num("stability", "fixed_point_tol")
    if mode == "targets":
        z_si, ydot_si = spec
        target = ApexState(sc.length_nd(z_si), sc.velocity_nd(ydot_si))
        ctrl = build_controller(cfg)
        sm, dim = closed_loop_map(target, ctrl.fmap, plant, cfg.deadbeat(),
                                  ctrl.adaptive)
        start = [target.z, target.ydot]
        if dim >= 4:
            start += [0.0, 0.0]
        if ctrl.adaptive.enabled:
            start.append(ctrl.fmap.params.rs)
        report = analyze_point(sm, np.array(start), (z_si, ydot_si), tol, h)
        row = (mode, z_si, ydot_si, math.nan, math.nan)
    else:  # gains: deviated true plant stiffness x adaptation gain
        factor, gain = spec
        scaled = [f"{ki * factor!r}" for ki in p.k]
        cfg.values["plant"]["stiffness"] = ", ".join(scaled)
        plant = build_plant(cfg)
        target = cfg.target()
        adapt = gain > 0.0
        ctrl = build_controller(cfg, adaptation=adapt)
        if adapt:
            ctrl.adaptive = AdaptiveConfig(
                gains=(gain, gain), signs=ctrl.adaptive.signs,
                rs_min=ctrl.adaptive.rs_min, rs_max=ctrl.adaptive.rs_max,
                enabled=True,
            )
        sm, dim = closed_loop_map(target, ctrl.fmap, plant, cfg.deadbeat(),
                                  ctrl.adaptive)
        start = [target.z, target.ydot]
        if dim >= 4:
            start += [0.0, 0.0]
        if ctrl.adaptive.enabled:
            start.append(ctrl.fmap.params.rs)
        report = analyze_point(sm, np.array(start), (factor, gain), tol, h)
        row = (mode, math.nan, math.nan, factor, gain)
    return idx, row, report


def stability_grid(cfg: ExperimentConfig):
    mode = cfg.text("stability", "mode")
    if mode == "targets":
        zs = np.linspace(cfg.num("stability", "apex_height_min"),
                         cfg.num("stability", "apex_height_max"),
                         cfg.integer("stability", "apex_height_count"))
        ys = np.linspace(cfg.num("stability", "forward_speed_min"),
                         cfg.num("stability", "forward_speed_max"),
                         cfg.integer("stability", "forward_speed_count"))
        return mode, [(float(z), float(y)) for z in zs for y in ys]
    ks = np.linspace(cfg.num("stability", "stiffness_factor_min"),
                     cfg.num("stability", "stiffness_factor_max"),
                     cfg.integer("stability", "stiffness_factor_count"))
    gains = np.linspace(0.0, cfg.num("stability", "gain_max"),
                        cfg.integer("stability", "gain_count"))
    return mode, [(float(k), float(g)) for k in ks for g in gains]


def run_stability(cfg: ExperimentConfig, workers: int = 1):
    mode, specs = stability_grid(cfg)
    ini = cfg.to_ini()
    jobs = [(i, ini, mode, spec) for i, spec in enumerate(specs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_stability_point, jobs))
        done.sort(key=lambda tup: tup[0])
    else:
        done = [_stability_point(job) for job in jobs]
    return [(row, report) for _, row, report in done]


# --------------------------------------------------------------------------
# CSV writers
# --------------------------------------------------------------------------

def strides_csv(records: list[StrideRecord], cfg: ExperimentConfig,
                si: bool = False) -> str:
    sc = cfg.plant_params().scale
    lines = [STRIDES_HEADER]
    for r in records:
        apex = r.apex
        z, ydot = apex.z, apex.ydot
        th, rtd, rlo = (r.control.as_tuple() if r.control
                        else (math.nan, math.nan, math.nan))
        zp, yp = ((r.predicted.z, r.predicted.ydot) if r.predicted
                  else (math.nan, math.nan))
        ez, ey = r.error if r.error else (math.nan, math.nan)
        k_hat = r.k_hat
        if si:
            z, zp = sc.length_si(z), sc.length_si(zp)
            ydot, yp = sc.velocity_si(ydot), sc.velocity_si(yp)
            ez, ey = sc.length_si(ez), sc.velocity_si(ey)
            rtd, rlo = sc.length_si(rtd), sc.length_si(rlo)
            k_hat = sc.stiffness_si(k_hat)
        lines.append(",".join([
            str(r.n), fmt(z), fmt(ydot), fmt(apex.alpha), fmt(apex.alphadot),
            fmt(th), fmt(rtd), fmt(rlo), fmt(zp), fmt(yp), fmt(ez), fmt(ey),
            fmt(k_hat), r.fault or "",
        ]))
    return "\n".join(lines) + "\n"


def trajectory_csv(records: list[StrideRecord], cfg: ExperimentConfig,
                   si: bool = False) -> str:
    sc = cfg.plant_params().scale
    lines = [TRAJECTORY_HEADER]
    t_off = 0.0
    y_off = 0.0
    for rec in records:
        if not rec.trajectory:
            continue
        marks: dict[int, list[str]] = {}
        for ev in rec.events:
            best, best_dt = 0, math.inf
            for i, row in enumerate(rec.trajectory):
                dt = abs(row[0] - ev.time)
                if dt < best_dt:
                    best, best_dt = i, dt
            marks.setdefault(best, []).append(ev.kind)
        for i, row in enumerate(rec.trajectory):
            t, phase, y, z, alpha, ydot, zdot, alphadot, _ = row
            t, y = t + t_off, y + y_off
            if si:
                t *= sc.time
                y, z = sc.length_si(y), sc.length_si(z)
                ydot, zdot = sc.velocity_si(ydot), sc.velocity_si(zdot)
                alphadot /= sc.time
            lines.append(",".join([
                fmt(t), phase, fmt(y), fmt(z), fmt(alpha), fmt(ydot),
                fmt(zdot), fmt(alphadot), ";".join(marks.get(i, [])),
            ]))
        last = rec.trajectory[-1]
        t_off += last[0]
        y_off += last[2]
    return "\n".join(lines) + "\n"


def sweep_csv(results, cfg: ExperimentConfig, si: bool = False) -> str:
    sc = cfg.plant_params().scale
    lines = [SWEEP_HEADER]
    for adapt, pt in results:
        ez, ey = pt.e_z, pt.e_ydot
        if si:
            ez, ey = sc.length_si(ez), sc.velocity_si(ey)
        lines.append(",".join([
            pt.parameter, fmt(pt.deviation), "on" if adapt else "off",
            fmt(ez), fmt(ey), "true" if pt.reached_fixed_point else "false",
            pt.fault or "",
        ]))
    return "\n".join(lines) + "\n"


def stability_csv(results) -> str:
    lines = [STABILITY_HEADER]
    for (mode, z, y, kf, gain), rep in results:
        lines.append(",".join([
            mode, fmt(z), fmt(y), fmt(kf), fmt(gain),
            "true" if rep.converged else "false", fmt(rep.max_eig),
            "true" if rep.stable else "false", rep.note,
        ]))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# SVG plots (matplotlib, Agg backend)
# --------------------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def response_svg(records, cfg: ExperimentConfig, path: Path) -> None:
    plt = _pyplot()
    target = cfg.target()
    ok = [r for r in records if not r.fault]
    ns = [r.n for r in ok]
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
    axes[0].plot(ns, [r.apex.z for r in ok], "o-", ms=3)
    axes[0].axhline(target.z, ls="--", color="tab:red", lw=1)
    axes[0].set_ylabel("apex height z [-]")
    axes[1].plot(ns, [r.apex.ydot for r in ok], "o-", ms=3)
    axes[1].axhline(target.ydot, ls="--", color="tab:red", lw=1)
    axes[1].set_ylabel("apex speed $\\dot{y}$ [-]")
    believed = cfg.estimate().template(cfg.plant_params().g)
    true_rs = cfg.plant_params().template().rs
    axes[2].plot(ns, [r.k_hat for r in ok], "o-", ms=3)
    axes[2].axhline(true_rs, ls="--", color="tab:red", lw=1)
    axes[2].set_ylabel("stiffness estimate [-]")
    axes[2].set_xlabel("stride n")
    for ax in axes:
        ax.margins(0.05)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def sweep_svg(results, cfg: ExperimentConfig, path: Path) -> None:
    plt = _pyplot()
    params = sorted({pt.parameter for _, pt in results})
    fig, axes = plt.subplots(len(params), 1, figsize=(7, 3 * len(params)),
                             squeeze=False)
    for ax, param in zip(axes[:, 0], params):
        for adapt, style in ((False, "o"), (True, "s")):
            pts = [pt for a, pt in results if a == adapt and pt.parameter == param]
            if not pts:
                continue
            lbl = "adaptive" if adapt else "non-adaptive"
            conv = [p for p in pts if p.reached_fixed_point]
            part = [p for p in pts if not p.reached_fixed_point]
            ax.plot([p.deviation for p in conv], [p.e_z for p in conv],
                    style + "-", color="tab:blue", label=f"$e_z$ {lbl}")
            ax.plot([p.deviation for p in conv], [p.e_ydot for p in conv],
                    style + "-", color="tab:orange", label=f"$e_{{\\dot y}}$ {lbl}")
            ax.plot([p.deviation for p in part], [0.0 for p in part], "x",
                    color="tab:red", label=f"not settled ({lbl})" if part else None)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_title(f"{param} deviation sweep")
        ax.set_xlabel("deviation fraction")
        ax.set_ylabel("steady-state apex error [-]")
        ax.margins(0.05)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def stability_svg(results, path: Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 5))
    mode = results[0][0][0] if results else "targets"
    xs, ys, cs = [], [], []
    for (m, z, y, kf, gain), rep in results:
        if not rep.converged:
            continue
        xs.append(z if mode == "targets" else kf)
        ys.append(y if mode == "targets" else gain)
        cs.append(rep.max_eig)
    if xs:
        scat = ax.scatter(xs, ys, c=cs, cmap="viridis", s=60)
        cb = fig.colorbar(scat, ax=ax)
        cb.set_label("max $|\\lambda|$ (unit = stability threshold)")
    bad = [(row, rep) for row, rep in results if not rep.converged]
    for (m, z, y, kf, gain), _ in bad:
        ax.scatter([z if mode == "targets" else kf],
                   [y if mode == "targets" else gain], marker="x", color="red")
    if mode == "targets":
        ax.set_xlabel("target apex height [m]")
        ax.set_ylabel("target forward speed [m/s]")
    else:
        ax.set_xlabel("plant stiffness factor")
        ax.set_ylabel("adaptation gain")
    ax.margins(0.05)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# --------------------------------------------------------------------------
# Archives and replay
# --------------------------------------------------------------------------

@dataclass
class RunArchive:
    """A self-contained run directory: config + metadata + artifacts."""

    root: Path

    @property
    def config_path(self) -> Path:
        return self.root / "config.ini"

    @property
    def meta_path(self) -> Path:
        return self.root / "meta.json"

    def config(self) -> ExperimentConfig:
        if not self.config_path.is_file():
            raise ConfigError(f"not a run archive (no config.ini): {self.root}")
        return parse_config(self.config_path.read_text(),
                            source=str(self.config_path))

    def meta(self) -> dict:
        if not self.meta_path.is_file():
            raise ConfigError(f"not a run archive (no meta.json): {self.root}")
        return json.loads(self.meta_path.read_text())


def execute(cfg: ExperimentConfig, out: Path, si: bool = False,
            trajectory: bool = False, workers: int = 1) -> RunArchive:
    """Run the configured experiment and persist a complete archive."""
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    if cfg.kind == "single-run":
        records = run_single(cfg, collect=trajectory)
        (out / "strides.csv").write_text(strides_csv(records, cfg, si))
        if trajectory:
            (out / "trajectory.csv").write_text(trajectory_csv(records, cfg, si))
        response_svg(records, cfg, out / "response.svg")
    elif cfg.kind == "sweep":
        results = run_sweep(cfg, workers)
        (out / "sweep.csv").write_text(sweep_csv(results, cfg, si))
        sweep_svg(results, cfg, out / "sweep.svg")
    else:
        results = run_stability(cfg, workers)
        (out / "stability.csv").write_text(stability_csv(results))
        stability_svg(results, out / "stability.svg")
    (out / "config.ini").write_text(cfg.to_ini())
    meta = {
        "tool": "pronksim",
        "version": __version__,
        "kind": cfg.kind,
        "flags": {"si": si, "trajectory": trajectory},
        "defaulted_keys": cfg.defaulted,
        "started_unix": started,
        "wall_seconds": time.time() - started,
        "platform": platform.platform(),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return RunArchive(out)


def replay(archive: RunArchive, out: Path, workers: int = 1):
    """Re-execute an archive from its embedded config and diff the CSVs.

    Returns (ok, report_lines); ok is True when every CSV matches bitwise.
    """
    cfg = archive.config()
    meta = archive.meta()
    flags = meta.get("flags", {})
    fresh = execute(cfg, out, si=bool(flags.get("si")),
                    trajectory=bool(flags.get("trajectory")), workers=workers)
    lines = []
    ok = True
    compared = 0
    for name in REPLAY_FILES:
        old = archive.root / name
        new = fresh.root / name
        if not old.is_file():
            continue
        compared += 1
        if not new.is_file():
            ok = False
            lines.append(f"{name}: missing from replay output")
        elif old.read_bytes() == new.read_bytes():
            lines.append(f"{name}: identical")
        else:
            ok = False
            lines.append(f"{name}: DIFFERS")
    if compared == 0:
        ok = False
        lines.append("archive contains no CSV artifacts to compare")
    return ok, lines
