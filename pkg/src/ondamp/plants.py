"""Continuous-time plant right-hand sides.

Three plants share the position/velocity state ``(x1, x2)``:

* the double integrator ``x1' = x2, x2' = u``;
* the first-order-lag motor ``tau x2' + x2 = K u`` behind a free integrator;
* a synthetic voice-coil drive driven by a voltage ``U`` with gravity,
  position-periodic force ripple and Coulomb friction.

A matched disturbance ``xi`` enters each plant through the control channel,
so a proportional gain ``k`` leaves a static offset ``xi / k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .errors import ConfigurationError
from .signals import NoiseSpec, sample_noise


class State2(NamedTuple):
    x1: float
    x2: float


def sign(x: float) -> float:
    """Sign with ``sign(0) = 0``."""
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


@dataclass(frozen=True)
class MotorParams:
    K: float
    tau: float

    def __post_init__(self):
        if not (self.K > 0 and self.tau > 0):
            raise ConfigurationError(f"MotorParams needs K > 0 and tau > 0, got {self}")


PSI = 17.16  # N/A
R_COIL = 5.23  # Ohm
MASS = 0.538  # kg
G = 9.8  # m/s^2
IDENTIFIED_MOTOR = MotorParams(K=0.0463, tau=0.0076)


@dataclass(frozen=True)
class VoiceCoilParams:
    """Voice-coil drive constants.

    The viscous coefficient is derived as ``sigma = mass / motor.tau``.
    With the lab preset this gives an implied input gain
    ``Ku * tau / mass = 0.04635``, consistent with the identified
    ``motor.K = 0.0463`` used by the controllers.
    """

    motor: MotorParams = IDENTIFIED_MOTOR
    mass: float = MASS
    Ku: float = PSI / R_COIL
    g: float = G
    ripple_amplitude: float = 0.0
    ripple_period: float = 2e-3
    coulomb: float = 0.0
    stroke_limit: float = 0.012
    xi_const: float = 0.0
    voltage_range: tuple[float, float] | None = (0.0, 10.0)

    def __post_init__(self):
        if not (self.mass > 0 and self.Ku > 0 and self.ripple_period > 0
                and self.stroke_limit > 0 and self.coulomb >= 0):
            raise ConfigurationError(f"invalid voice-coil parameters: {self}")

    @property
    def sigma(self) -> float:
        return self.mass / self.motor.tau

    @property
    def gravity_bias(self) -> float:
        """Voltage that holds the mover against gravity, ``m g / Ku``."""
        return self.mass * self.g / self.Ku


def voice_coil_lab() -> VoiceCoilParams:
    """The ``voice-coil-lab`` preset.

    Ripple and Coulomb magnitudes are not measured values; they are chosen
    so that the 0.2 V jitter dither is large enough to matter.
    """
    return VoiceCoilParams(ripple_amplitude=0.15, ripple_period=2e-3, coulomb=0.1)


@dataclass(frozen=True)
class DoubleIntegrator:
    kind: str = field(default="double-integrator", init=False)


@dataclass(frozen=True)
class LagMotor:
    params: MotorParams = IDENTIFIED_MOTOR
    kind: str = field(default="lag-motor", init=False)


@dataclass(frozen=True)
class VoiceCoil:
    params: VoiceCoilParams = field(default_factory=voice_coil_lab)
    kind: str = field(default="voice-coil", init=False)


PlantSpec = Union[DoubleIntegrator, LagMotor, VoiceCoil]

DISTURBANCE_KINDS = ("none", "constant", "pulse", "manual-profile")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Matched disturbance profile ``xi(t)``.

    ``process_std`` adds seeded white process noise (held over each control
    period) on top of the deterministic profile.
    """

    kind: str = "none"
    magnitude: float = 0.0
    window: tuple[float, float] = (0.0, math.inf)
    profile: tuple[tuple[float, float], ...] = ()
    process_std: float = 0.0
    seed: int = 1

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ConfigurationError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "pulse" and not self.window[0] <= self.window[1]:
            raise ConfigurationError(f"pulse window must be ordered, got {self.window}")
        if self.kind == "manual-profile":
            prof = tuple((float(t), float(v)) for t, v in self.profile)
            times = [t for t, _ in prof]
            if not prof or any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigurationError("manual profile needs increasing times")
            object.__setattr__(self, "profile", prof)
        if self.process_std < 0:
            raise ConfigurationError("process_std must be >= 0")


def eval_disturbance(spec: DisturbanceSpec, t: float, step_index: int = 0) -> float:
    kind = spec.kind
    if kind == "none":
        xi = 0.0
    elif kind == "constant":
        xi = spec.magnitude
    elif kind == "pulse":
        xi = spec.magnitude if spec.window[0] <= t < spec.window[1] else 0.0
    else:
        times = [p[0] for p in spec.profile]
        values = [p[1] for p in spec.profile]
        if t < times[0] or t > times[-1]:
            xi = 0.0
        else:
            xi = float(np.interp(t, times, values))
    if spec.process_std > 0:
        xi += sample_noise(NoiseSpec(spec.process_std, spec.seed), step_index)
    return xi


def rhs_double_integrator(state: State2, u: float, xi: float = 0.0) -> tuple[float, float]:
    return state[1], u + xi


def rhs_motor(state: State2, u: float, p: MotorParams, xi: float = 0.0) -> tuple[float, float]:
    """Lag motor with ``xi`` added in control units (``K * xi`` on the force balance)."""
    x2 = state[1]
    return x2, (p.K * (u + xi) - x2) / p.tau


def ripple_force(x1: float, p: VoiceCoilParams) -> float:
    return p.ripple_amplitude * math.sin(2.0 * math.pi * x1 / p.ripple_period)


def rhs_voice_coil(state: State2, U: float, p: VoiceCoilParams, xi: float = 0.0) -> tuple[float, float]:
    """Voice-coil drive under terminal voltage ``U``.

    ``xi`` is a force (N) and adds to ``p.xi_const``.
    """
    x1, x2 = state
    force = (p.Ku * U - p.mass * p.g - ripple_force(x1, p)
             - p.coulomb * sign(x2) + p.xi_const + xi)
    return x2, (force - p.sigma * x2) / p.mass


def measure_position(state: State2, p: VoiceCoilParams | None = None, noise: float = 0.0) -> float:
    """Sensor reading of ``x1``; clamped to ``[0, stroke_limit]`` for the voice coil."""
    y = state[0] + noise
    if p is None:
        return y
    return min(max(y, 0.0), p.stroke_limit)
