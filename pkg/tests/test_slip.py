"""Stance/flight dynamics oracles and leg-kinematics round trips."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from pronksim import slip
from pronksim.errors import (
    OutOfWorkspaceError,
    PhaseMismatchError,
    SingularConfigurationError,
)
from pronksim.params import SlipParams


class TestStanceDynamics:
    def test_vertical_hop_matches_harmonic_oscillator(self):
        # theta = 0 pinned: rddot = rs(1-r) - 1, a linear oscillator about
        # r_eq = 1 - 1/rs with angular frequency sqrt(rs).
        p = SlipParams(rs=12.0, rb=0.0)
        r0, dr0 = 0.85, 0.0
        sol = solve_ivp(
            lambda t, x: slip.stance_deriv((x[0], 0.0, x[1], 0.0), p)[::2],
            (0.0, 1.2), [r0, dr0], rtol=1e-11, atol=1e-13, dense_output=True,
        )
        r_eq = 1.0 - 1.0 / p.rs
        w = math.sqrt(p.rs)
        for t in np.linspace(0.0, 1.2, 40):
            r_exact = r_eq + (r0 - r_eq) * math.cos(w * t)
            assert sol.sol(t)[0] == pytest.approx(r_exact, abs=1e-8)

    def test_passive_stance_conserves_energy(self):
        p = SlipParams(rs=11.9, rb=0.0)
        x0 = (0.95, -0.35, -0.6, 1.1)
        sol = solve_ivp(
            lambda t, x: slip.stance_deriv(tuple(x), p),
            (0.0, 0.6), list(x0), rtol=1e-11, atol=1e-13, dense_output=True,
        )
        e0 = slip.stance_energy(x0, p)
        for t in np.linspace(0.0, 0.6, 30):
            e = slip.stance_energy(tuple(sol.sol(t)), p)
            assert abs(e - e0) / abs(e0) < 1e-9

    def test_damped_stance_dissipates_monotonically(self):
        p = SlipParams(rs=11.9, rb=0.5)
        sol = solve_ivp(
            lambda t, x: slip.stance_deriv(tuple(x), p),
            (0.0, 0.5), [0.95, -0.35, -0.6, 1.1], rtol=1e-10, atol=1e-12,
            dense_output=True,
        )
        ts = np.linspace(0.0, 0.5, 60)
        es = [slip.stance_energy(tuple(sol.sol(t)), p) for t in ts]
        assert all(e1 <= e0 + 1e-12 for e0, e1 in zip(es, es[1:]))

    def test_hip_torque_enters_angular_equation_only(self):
        p = SlipParams(rs=10.0, rb=0.1)
        x = (0.9, 0.2, -0.3, 0.8)
        d0 = slip.stance_deriv(x, p, tau=0.0)
        d1 = slip.stance_deriv(x, p, tau=0.25)
        assert d1[2] == d0[2]
        assert d1[3] - d0[3] == pytest.approx(0.25 / (x[0] * x[0]), rel=1e-12)

    def test_collapsed_leg_raises(self):
        with pytest.raises(SingularConfigurationError):
            slip.stance_deriv((0.0, 0.0, 0.0, 0.0), SlipParams(10.0, 0.0))

    def test_flight_deriv_is_ballistic(self):
        assert slip.flight_deriv((0.0, 1.2, 1.0, -0.3)) == (1.0, -0.3, 0.0, -1.0)
        with pytest.raises(PhaseMismatchError):
            slip.flight_deriv((0.0, -0.1, 1.0, 0.0))


class TestLegKinematics:
    @given(
        st.floats(min_value=-1.2, max_value=1.2),
        st.floats(min_value=0.3, max_value=1.05),
        st.floats(min_value=-3.0, max_value=3.0),
        st.floats(min_value=-3.0, max_value=3.0),
    )
    @settings(max_examples=200)
    def test_polar_cartesian_round_trip(self, th, r, vy, vz):
        hip = (0.4, r * math.cos(th))
        toe = slip.leg_cartesian(hip, r, th)
        r2, th2, dr, dth = slip.leg_polar(hip, toe, (vy, vz))
        assert r2 == pytest.approx(r, abs=1e-12)
        assert th2 == pytest.approx(th, abs=1e-12)
        # Rate transform inverts: reconstruct hip velocity from (dr, dth).
        vy2 = -dr * math.sin(th) - r * dth * math.cos(th)
        vz2 = dr * math.cos(th) - r * dth * math.sin(th)
        assert vy2 == pytest.approx(vy, abs=1e-9)
        assert vz2 == pytest.approx(vz, abs=1e-9)

    @given(
        st.floats(min_value=-1.0, max_value=1.0),
        st.floats(min_value=0.4, max_value=1.0),
        st.floats(min_value=-2.5, max_value=2.5),
        st.floats(min_value=-2.5, max_value=-0.01),
    )
    @settings(max_examples=200)
    def test_touchdown_liftoff_velocity_round_trip(self, th, r, ydot, zdot):
        x = slip.touchdown_polar(r * math.cos(th), ydot, zdot, th, r)
        z2, ydot2, zdot2 = slip.liftoff_cartesian(x)
        assert z2 == pytest.approx(r * math.cos(th), rel=1e-12)
        assert ydot2 == pytest.approx(ydot, abs=1e-12)
        assert zdot2 == pytest.approx(zdot, abs=1e-12)

    def test_leg_polar_errors(self):
        with pytest.raises(SingularConfigurationError):
            slip.leg_polar((0.0, 1.0), (0.0, 1.0))
        with pytest.raises(OutOfWorkspaceError):
            slip.leg_polar((0.0, 0.5), (0.1, 0.8))
        with pytest.raises(SingularConfigurationError):
            slip.leg_cartesian((0.0, 1.0), 0.0, 0.1)
