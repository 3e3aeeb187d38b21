"""Experiment configuration: flat INI with one section per module.

Every key has a documented default; parsing records which keys were absent
so archives can mark them as defaulted.  ``ExperimentConfig.to_ini`` emits
the complete effective configuration in a fixed order, which makes the
round trip lossless and archive diffs stable.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .control import AdaptiveConfig, DeadbeatConfig
from .errors import ConfigError
from .params import ApexState, ParamEstimate, PlantParams

_KINDS = ("single-run", "sweep", "stability")
_PLANTS = ("slip", "slimpod")
_SWEEP_PARAMS = ("stiffness", "mass", "damping", "map-offset")
_STABILITY_MODES = ("targets", "gains")

# section -> key -> default (as the string configparser would read).
SCHEMA: dict[str, dict[str, str]] = {
    "experiment": {
        "kind": "single-run",
        "plant": "slip",
        "strides": "60",
        "seed": "0",
    },
    "plant": {
        "mass": "9.0",
        "inertia": "0.08",
        "stiffness": "2000.0, 2000.0, 2000.0",
        "damping": "12.0, 12.0, 12.0",
        "rest_length": "0.175",
        "hip_offsets": "-0.2, 0.0, 0.2",
        "gravity": "9.81",
    },
    "estimate": {
        "stiffness": "2000.0",
        "damping": "12.0",
        "mass": "9.0",
        "rest_length": "0.175",
    },
    "target": {
        "apex_height": "0.195",
        "forward_speed": "1.6",
    },
    "simulation": {
        "rtol": "1e-9",
        "atol": "1e-11",
    },
    "predictor": {
        "step": "0.01",
        "offset_z_frac": "0.0",
        "offset_ydot_frac": "0.0",
    },
    "deadbeat": {
        "tolerance": "1e-6",
        "max_iterations": "40",
        "fd_step": "1e-7",
        "theta_limit": "1.35",
        "r_min": "0.4",
        "polish_iterations": "2",
    },
    "adaptive": {
        "enabled": "false",
        "gain_z": "0.6",
        "gain_ydot": "0.6",
        "min_stiffness_factor": "0.4",
        "max_stiffness_factor": "2.5",
    },
    "embedding": {
        "kp_pitch": "8.0",
        "kd_pitch": "4.0",
        "last_leg_liftoff": "true",
    },
    "sweep": {
        "parameters": "stiffness",
        "deviation_min": "-0.2",
        "deviation_max": "0.2",
        "deviation_step": "0.05",
        "adaptation": "off",
        "max_strides": "200",
        "settle_window": "10",
        "settle_tol": "1e-6",
    },
    "stability": {
        "mode": "targets",
        "apex_height_min": "0.185",
        "apex_height_max": "0.275",
        "apex_height_count": "3",
        "forward_speed_min": "1.3096",
        "forward_speed_max": "1.9644",
        "forward_speed_count": "3",
        "stiffness_factor_min": "0.8",
        "stiffness_factor_max": "1.2",
        "stiffness_factor_count": "5",
        "gain_max": "1.2",
        "gain_count": "5",
        "jacobian_step": "1e-5",
        "fixed_point_tol": "1e-8",
        "max_strides": "200",
    },
}


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"[{section}] {key}: must be finite, got {raw!r}")
    return v


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from None


def _parse_bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"[{section}] {key}: not a boolean: {raw!r}")


def _parse_floats(section: str, key: str, raw: str, count: int | None) -> tuple:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    vals = tuple(_parse_float(section, key, p) for p in parts)
    if count is not None and len(vals) not in (1, count):
        raise ConfigError(
            f"[{section}] {key}: expected 1 or {count} values, got {len(vals)}"
        )
    if count is not None and len(vals) == 1:
        vals = vals * count
    return vals


def _parse_choice(section: str, key: str, raw: str, choices: tuple) -> str:
    v = raw.strip().lower()
    if v not in choices:
        raise ConfigError(
            f"[{section}] {key}: must be one of {', '.join(choices)}; got {raw!r}"
        )
    return v


@dataclass
class ExperimentConfig:
    """Fully-resolved configuration: every schema key has a value.

    ``values[section][key]`` holds the canonical string form; ``defaulted``
    lists "section.key" entries that were absent from the source file.
    """

    values: dict[str, dict[str, str]]
    defaulted: list[str] = field(default_factory=list)

    # -- raw typed access ---------------------------------------------------
    def text(self, section: str, key: str) -> str:
        return self.values[section][key]

    def num(self, section: str, key: str) -> float:
        return _parse_float(section, key, self.values[section][key])

    def integer(self, section: str, key: str) -> int:
        return _parse_int(section, key, self.values[section][key])

    def flag(self, section: str, key: str) -> bool:
        return _parse_bool(section, key, self.values[section][key])

    # -- derived objects ----------------------------------------------------
    @property
    def kind(self) -> str:
        return self.text("experiment", "kind")

    @property
    def plant_kind(self) -> str:
        return self.text("experiment", "plant")

    def plant_params(self) -> PlantParams:
        v = self.values["plant"]
        try:
            return PlantParams(
                m=self.num("plant", "mass"),
                inertia=self.num("plant", "inertia"),
                k=_parse_floats("plant", "stiffness", v["stiffness"], 3),
                b=_parse_floats("plant", "damping", v["damping"], 3),
                l0=self.num("plant", "rest_length"),
                d=_parse_floats("plant", "hip_offsets", v["hip_offsets"], 3),
                g=self.num("plant", "gravity"),
            )
        except ValueError as exc:
            raise ConfigError(f"[plant]: {exc}") from None

    def estimate(self) -> ParamEstimate:
        try:
            return ParamEstimate(
                k_hat=self.num("estimate", "stiffness"),
                b_hat=self.num("estimate", "damping"),
                m_hat=self.num("estimate", "mass"),
                l0_hat=self.num("estimate", "rest_length"),
            )
        except ValueError as exc:
            raise ConfigError(f"[estimate]: {exc}") from None

    def target(self) -> ApexState:
        sc = self.plant_params().scale
        z = sc.length_nd(self.num("target", "apex_height"))
        ydot = sc.velocity_nd(self.num("target", "forward_speed"))
        if z <= 1.0:
            raise ConfigError(
                "[target] apex_height: apex must sit above the leg rest length"
            )
        return ApexState(z, ydot)

    def deadbeat(self) -> DeadbeatConfig:
        return DeadbeatConfig(
            tolerance=self.num("deadbeat", "tolerance"),
            max_iter=self.integer("deadbeat", "max_iterations"),
            fd_step=self.num("deadbeat", "fd_step"),
            theta_limit=self.num("deadbeat", "theta_limit"),
            r_min=self.num("deadbeat", "r_min"),
            polish_iters=self.integer("deadbeat", "polish_iterations"),
        )

    def adaptive(self, initial_rs: float) -> AdaptiveConfig:
        return AdaptiveConfig(
            enabled=self.flag("adaptive", "enabled"),
            gains=(self.num("adaptive", "gain_z"), self.num("adaptive", "gain_ydot")),
            rs_min=self.num("adaptive", "min_stiffness_factor") * initial_rs,
            rs_max=self.num("adaptive", "max_stiffness_factor") * initial_rs,
        )

    def sweep_parameters(self) -> list[str]:
        raw = self.text("sweep", "parameters")
        names = [p.strip().lower() for p in raw.split(",") if p.strip()]
        if not names:
            raise ConfigError("[sweep] parameters: empty list")
        for n in names:
            if n not in _SWEEP_PARAMS:
                raise ConfigError(
                    f"[sweep] parameters: unknown parameter {n!r}"
                    f" (choices: {', '.join(_SWEEP_PARAMS)})"
                )
        return names

    def sweep_grid(self) -> list[float]:
        lo = self.num("sweep", "deviation_min")
        hi = self.num("sweep", "deviation_max")
        step = self.num("sweep", "deviation_step")
        if step <= 0 or hi < lo:
            raise ConfigError("[sweep]: need deviation_step > 0 and max >= min")
        n = int(round((hi - lo) / step))
        grid = [round(lo + i * step, 12) for i in range(n + 1)]
        if any(abs(d) > 0.5 for d in grid):
            raise ConfigError("[sweep]: deviation grid limited to +/-50%")
        return grid

    def validate(self) -> None:
        """Full structural validation; raises ConfigError on the first defect."""
        _parse_choice("experiment", "kind", self.kind, _KINDS)
        _parse_choice("experiment", "plant", self.plant_kind, _PLANTS)
        if self.integer("experiment", "strides") < 1:
            raise ConfigError("[experiment] strides: must be >= 1")
        self.plant_params()
        self.estimate()
        self.target()
        self.deadbeat()
        self.adaptive(1.0)
        if self.num("predictor", "step") <= 0:
            raise ConfigError("[predictor] step: must be positive")
        _parse_choice("sweep", "adaptation", self.text("sweep", "adaptation"),
                      ("off", "on", "both"))
        self.sweep_parameters()
        self.sweep_grid()
        _parse_choice("stability", "mode", self.text("stability", "mode"),
                      _STABILITY_MODES)
        for key in ("apex_height_count", "forward_speed_count",
                    "stiffness_factor_count", "gain_count"):
            if self.integer("stability", key) < 1:
                raise ConfigError(f"[stability] {key}: must be >= 1")

    def to_ini(self) -> str:
        out = io.StringIO()
        for si, (section, keys) in enumerate(SCHEMA.items()):
            if si:
                out.write("\n")
            out.write(f"[{section}]\n")
            for key in keys:
                out.write(f"{key} = {self.values[section][key]}\n")
        return out.getvalue()


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key [{section}] {key}")
    values: dict[str, dict[str, str]] = {}
    defaulted: list[str] = []
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, default in keys.items():
            if parser.has_option(section, key):
                values[section][key] = parser.get(section, key).strip()
            else:
                values[section][key] = default
                defaulted.append(f"{section}.{key}")
    cfg = ExperimentConfig(values=values, defaulted=defaulted)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=str(path))


def default_config() -> ExperimentConfig:
    return parse_config("")
