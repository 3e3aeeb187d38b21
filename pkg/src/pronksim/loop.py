"""Closed-loop stride execution: plant + dead-beat controller + adaptation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .control import (
    AdaptiveConfig,
    DeadbeatConfig,
    EmbeddingController,
    adaptive_update,
    deadbeat_solve,
    measure_sensitivity_signs,
    prediction_error,
)
from .errors import InfeasibleControlError, PronkError, SimulationFault
from .hybrid import PLANT_ATOL, PLANT_RTOL, StrideRecord, slip_apex_map
from .params import ApexState, ControlInput, SlimpodParams, SlipParams
from .predictor import PredictiveMap
from .slimpod import slimpod_apex_map


@dataclass
class SlipPlant:
    """Exact-map backend for the single-leg template plant."""

    params: SlipParams
    rtol: float = PLANT_RTOL
    atol: float = PLANT_ATOL

    state_dim = 2

    def stride(self, apex, u, estimates, collect=False):
        return slip_apex_map(apex, u, self.params, self.rtol, self.atol, collect)


@dataclass
class SlimpodPlant:
    """Exact-map backend for the hexapod plant under the embedding controller."""

    params: SlimpodParams
    kp_pitch: float = 8.0
    kd_pitch: float = 4.0
    last_leg_liftoff: bool = True
    rtol: float = PLANT_RTOL
    atol: float = PLANT_ATOL

    state_dim = 4

    def stride(self, apex, u, estimates: SlipParams, collect=False):
        embed = EmbeddingController(
            template=estimates,
            leg_rs=tuple(estimates.rs / 3.0 for _ in range(3)),
            leg_rb=tuple(estimates.rb / 3.0 for _ in range(3)),
            kp_pitch=self.kp_pitch,
            kd_pitch=self.kd_pitch,
        )
        return slimpod_apex_map(
            apex, u, self.params, embed, self.last_leg_liftoff,
            self.rtol, self.atol, collect,
        )


@dataclass
class StrideController:
    """Dead-beat stride controller with optional indirect stiffness adaptation.

    Owns the mutable approximate map (whose stiffness the adaptive layer
    updates between strides) and warm-starts the dead-beat solve from the
    previous stride's input.
    """

    target: ApexState
    fmap: PredictiveMap
    deadbeat: DeadbeatConfig = field(default_factory=DeadbeatConfig)
    adaptive: AdaptiveConfig = field(default_factory=lambda: AdaptiveConfig(enabled=False))
    warm: ControlInput | None = None
    held: bool = False

    def calibrate_signs(self) -> None:
        """Measure the stiffness sensitivity signs at the target point."""
        u, _ = deadbeat_solve(self.target, self.target, self.fmap, self.deadbeat)
        signs = measure_sensitivity_signs(self.fmap, self.target, u)
        self.adaptive = replace(self.adaptive, signs=signs)

    @property
    def rs_hat(self) -> float:
        return self.fmap.params.rs

    def decide(self, apex: ApexState) -> tuple[ControlInput, ApexState, bool]:
        u, converged = deadbeat_solve(
            apex, self.target, self.fmap, self.deadbeat, guess=self.warm
        )
        self.warm = u
        predicted = self.fmap.predict(apex, u)
        return u, predicted, converged

    def observe(self, apex: ApexState, error: tuple[float, float]) -> None:
        rs_new, held = adaptive_update(self.fmap.params.rs, apex, error, self.adaptive)
        self.held = held
        if rs_new != self.fmap.params.rs:
            self.fmap.params = SlipParams(rs_new, self.fmap.params.rb)


def simulate_strides(
    apex0: ApexState,
    controller: StrideController,
    plant,
    n: int,
    collect: bool = False,
) -> list[StrideRecord]:
    """Run n closed-loop strides, recording everything per stride.

    Faults truncate the run: the faulting stride is recorded with its fault
    reason and the remaining strides are marked failed without simulation.
    """
    if n < 1:
        raise ValueError("need at least one stride")
    records: list[StrideRecord] = []
    apex = apex0
    for i in range(n):
        rs_hat = controller.rs_hat
        try:
            u, predicted, _ = controller.decide(apex)
            next_apex, events, traj = plant.stride(
                apex, u, controller.fmap.params, collect
            )
        except PronkError as exc:
            records.append(StrideRecord(
                n=i, apex=apex, control=None, predicted=None, next_apex=None,
                error=None, k_hat=rs_hat, fault=str(exc) or type(exc).__name__,
            ))
            for j in range(i + 1, n):
                records.append(StrideRecord(
                    n=j, apex=apex, control=None, predicted=None, next_apex=None,
                    error=None, k_hat=rs_hat, fault="not-run (earlier fault)",
                ))
            return records
        error = prediction_error(next_apex, predicted)
        records.append(StrideRecord(
            n=i, apex=apex, control=u, predicted=predicted, next_apex=next_apex,
            error=error, k_hat=rs_hat, fault=None, events=events, trajectory=traj,
        ))
        controller.observe(apex, error)
        apex = next_apex
    return records
