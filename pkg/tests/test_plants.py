import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ondamp.errors import ConfigurationError
from ondamp.plants import (
    IDENTIFIED_MOTOR,
    DisturbanceSpec,
    MotorParams,
    State2,
    VoiceCoilParams,
    eval_disturbance,
    measure_position,
    rhs_double_integrator,
    rhs_motor,
    rhs_voice_coil,
    ripple_force,
    sign,
    voice_coil_lab,
)


def test_sign_convention():
    assert sign(0.0) == 0.0
    assert sign(-3.0) == -1.0
    assert sign(np.float64(2.0)) == 1.0


def test_double_integrator():
    assert rhs_double_integrator(State2(1.0, 2.0), 3.0, 0.5) == (2.0, 3.5)


def test_motor_steady_velocity():
    # constant input u: x2 settles where K u = x2
    p = IDENTIFIED_MOTOR
    _, acc = rhs_motor(State2(0.0, p.K * 2.0), 2.0, p)
    assert acc == pytest.approx(0.0, abs=1e-15)


def test_motor_disturbance_enters_in_control_units():
    p = IDENTIFIED_MOTOR
    assert rhs_motor(State2(0, 0), 1.0, p, 0.5) == rhs_motor(State2(0, 0), 1.5, p)


def test_motor_params_validation():
    with pytest.raises(ConfigurationError):
        MotorParams(0.0, 0.01)


def test_voice_coil_implied_gain_matches_identified_motor():
    p = voice_coil_lab()
    implied = p.Ku * p.motor.tau / p.mass
    assert implied == pytest.approx(IDENTIFIED_MOTOR.K, rel=2e-3)
    assert p.sigma == pytest.approx(p.mass / p.motor.tau)


def test_voice_coil_holds_against_gravity_at_bias():
    p = VoiceCoilParams()  # no ripple, no friction
    _, acc = rhs_voice_coil(State2(0.005, 0.0), p.gravity_bias, p)
    assert acc == pytest.approx(0.0, abs=1e-12)


def test_ripple_is_position_periodic():
    p = voice_coil_lab()
    for x in (0.0, 0.0013, 0.007):
        assert ripple_force(x, p) == pytest.approx(ripple_force(x + p.ripple_period, p), abs=1e-12)
    assert ripple_force(p.ripple_period / 4, p) == pytest.approx(p.ripple_amplitude)


def test_measurement_clamped_to_stroke():
    p = voice_coil_lab()
    assert measure_position(State2(-0.001, 0), p) == 0.0
    assert measure_position(State2(0.02, 0), p) == p.stroke_limit
    assert measure_position(State2(0.005, 0), p, 1e-6) == pytest.approx(0.005001)
    assert measure_position(State2(-1.0, 0)) == -1.0


def test_disturbance_profiles():
    assert eval_disturbance(DisturbanceSpec(), 1.0) == 0.0
    assert eval_disturbance(DisturbanceSpec("constant", 2.0), 1.0) == 2.0
    pulse = DisturbanceSpec("pulse", 1.0, window=(1.0, 2.0))
    assert [eval_disturbance(pulse, t) for t in (0.5, 1.0, 1.5, 2.0)] == [0, 1, 1, 0]
    prof = DisturbanceSpec("manual-profile", profile=((0.0, 0.0), (1.0, 2.0)))
    assert eval_disturbance(prof, 0.5) == pytest.approx(1.0)
    assert eval_disturbance(prof, 1.5) == 0.0


def test_disturbance_process_noise_is_seeded():
    d = DisturbanceSpec("constant", 1.0, process_std=0.1, seed=5)
    a = [eval_disturbance(d, 0.0, i) for i in range(10)]
    assert a == [eval_disturbance(d, 0.0, i) for i in range(10)]
    assert np.std(a) > 0


@pytest.mark.parametrize("kw", [
    dict(kind="ramp"),
    dict(kind="manual-profile", profile=((1.0, 0.0), (0.5, 1.0))),
    dict(kind="pulse", window=(2.0, 1.0)),
    dict(process_std=-1.0),
])
def test_disturbance_validation(kw):
    with pytest.raises(ConfigurationError):
        DisturbanceSpec(**kw)


@given(x2=st.floats(-1, 1), U=st.floats(0, 10))
def test_coulomb_friction_opposes_motion(x2, U):
    p = voice_coil_lab()
    frictionless = VoiceCoilParams(ripple_amplitude=p.ripple_amplitude, coulomb=0.0)
    _, a = rhs_voice_coil(State2(0.004, x2), U, p)
    _, a0 = rhs_voice_coil(State2(0.004, x2), U, frictionless)
    assert (a - a0) * x2 <= 0
    assert math.isclose(abs(a - a0), p.coulomb / p.mass if x2 else 0.0, rel_tol=1e-9, abs_tol=1e-9)
