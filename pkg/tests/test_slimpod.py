"""Hexapod plant: template equivalence, pitch regulation, faults."""

import math

import pytest

from pronksim.control import EmbeddingController
from pronksim.errors import SimulationFault
from pronksim.hybrid import slip_apex_map
from pronksim.params import ApexState, ControlInput, SlipParams
from pronksim.slimpod import slimpod_apex_map

U = ControlInput(0.45, 0.85, 1.0)


def _embed(plant_params, believed=None):
    sp = plant_params.slimpod()
    tpl = believed or plant_params.template()
    return EmbeddingController(template=tpl, leg_rs=sp.rs, leg_rb=sp.rb), sp


class TestTemplateEquivalence:
    def test_level_stride_matches_single_leg_template(self, plant_params,
                                                      target, template):
        # With zero pitch, parallel leg placement makes the three legs
        # congruent: their summed passive forces equal the template's and
        # the embedding demands vanish, so the hexapod reproduces the
        # single-leg plant.
        embed, sp = _embed(plant_params)
        hexa, _, _ = slimpod_apex_map(target, U, sp, embed)
        mono, _, _ = slip_apex_map(target, U, template)
        assert hexa.z == pytest.approx(mono.z, abs=1e-9)
        assert hexa.ydot == pytest.approx(mono.ydot, abs=1e-9)
        assert abs(hexa.alpha) < 1e-10 and abs(hexa.alphadot) < 1e-10

    def test_estimate_errors_do_not_perturb_level_stride(self, plant_params,
                                                         target, template):
        # Same congruence argument with miscalibrated estimates: the
        # believed template force and the believed axial sum cancel, so the
        # embedding still commands zero torque at zero pitch.
        wrong = SlipParams(0.7 * template.rs, 1.3 * template.rb)
        embed, sp = _embed(plant_params, believed=wrong)
        hexa, _, _ = slimpod_apex_map(target, U, sp, embed)
        mono, _, _ = slip_apex_map(target, U, template)
        assert hexa.z == pytest.approx(mono.z, abs=1e-9)
        assert hexa.ydot == pytest.approx(mono.ydot, abs=1e-9)

    def test_event_sequence(self, plant_params, target):
        embed, sp = _embed(plant_params)
        _, events, _ = slimpod_apex_map(target, U, sp, embed)
        kinds = [e.kind for e in events]
        assert kinds[0] == "touchdown" and kinds[-1] == "apex"
        assert any(k.startswith("liftoff") for k in kinds)
        assert [e.time for e in events] == sorted(e.time for e in events)


class TestPitchDynamics:
    def test_initial_pitch_rate_is_damped_over_strides(self, plant_params,
                                                       target):
        from pronksim.control import deadbeat_solve
        from pronksim.predictor import PredictiveMap

        embed, sp = _embed(plant_params)
        fmap = PredictiveMap(plant_params.template())
        apex = ApexState(target.z, target.ydot, 0.0, 0.12)
        rates = [abs(apex.alphadot)]
        for _ in range(4):
            u, _ = deadbeat_solve(ApexState(apex.z, apex.ydot), target, fmap)
            apex, _, _ = slimpod_apex_map(apex, u, sp, embed)
            rates.append(abs(apex.alphadot))
        assert rates[-1] < 0.25 * rates[0]

    def test_four_component_apex_state(self, plant_params, target):
        embed, sp = _embed(plant_params)
        apex = ApexState(target.z, target.ydot, 0.02, -0.03)
        nxt, _, _ = slimpod_apex_map(apex, U, sp, embed)
        assert math.isfinite(nxt.alpha) and math.isfinite(nxt.alphadot)

    def test_determinism(self, plant_params, target):
        embed1, sp = _embed(plant_params)
        embed2, _ = _embed(plant_params)
        a, _, _ = slimpod_apex_map(ApexState(target.z, target.ydot, 0.01, 0.0),
                                   U, sp, embed1)
        b, _, _ = slimpod_apex_map(ApexState(target.z, target.ydot, 0.01, 0.0),
                                   U, sp, embed2)
        assert (a.z, a.ydot, a.alpha, a.alphadot) == (b.z, b.ydot, b.alpha,
                                                      b.alphadot)


class TestFaults:
    def test_energy_starved_stride_faults(self, plant_params):
        embed, sp = _embed(plant_params)
        low = ApexState(1.02, 0.1)
        with pytest.raises(SimulationFault):
            slimpod_apex_map(low, ControlInput(0.0, 0.95, 1.0), sp, embed)
