"""Velocity estimation from sampled position.

Two estimators:

* a second-order robust sliding-mode differentiator (SMD), integrated with
  explicit Euler at the controller rate;
* a baseline backward difference followed by a second-order Butterworth
  low-pass filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import signal

from .errors import ConfigurationError
from .plants import sign


class SmdState(NamedTuple):
    y0: float
    y1: float
    y2: float


@dataclass(frozen=True)
class SmdGains:
    """Base coefficients and Lipschitz scaling ``rho`` (``L = rho**3``).

    Effective gains are ``k0 rho``, ``k1 rho**2`` and ``k2 rho**3``.
    """

    k0: float = 3.1
    k1: float = 3.2
    k2: float = 1.1
    rho: float = 8.0

    def __post_init__(self):
        if min(self.k0, self.k1, self.k2, self.rho) <= 0:
            raise ConfigurationError(f"SMD gains must be positive, got {self}")

    @property
    def kappas(self) -> tuple[float, float, float]:
        r = self.rho
        return self.k0 * r, self.k1 * r * r, self.k2 * r ** 3


def smd_step(s: SmdState, x1_meas: float, g: SmdGains, dt: float) -> SmdState:
    """One explicit-Euler step of the SMD driven by the measurement ``x1_meas``."""
    c0, c1, c2 = g.kappas
    eps = s.y0 - x1_meas
    sgn = sign(eps)
    a = abs(eps)
    dy0 = -c0 * a ** (2.0 / 3.0) * sgn + s.y1
    dy1 = -c1 * a ** (1.0 / 3.0) * sgn + s.y2
    dy2 = -c2 * sgn
    return SmdState(s.y0 + dt * dy0, s.y1 + dt * dy1, s.y2 + dt * dy2)


def smd_init(x1_first: float) -> SmdState:
    return SmdState(x1_first, 0.0, 0.0)


@dataclass(frozen=True)
class LpfState:
    """Backward-difference + biquad state. Build with :func:`make_lpf`."""

    cutoff_hz: float
    dt: float
    b: tuple[float, float, float]
    a: tuple[float, float, float]
    prev_x: float | None = None
    z1: float = 0.0
    z2: float = 0.0


def make_lpf(cutoff_hz: float, dt: float) -> LpfState:
    """Second-order Butterworth (bilinear transform) at sample time ``dt``."""
    if dt <= 0:
        raise ConfigurationError("dt must be > 0")
    nyquist = 0.5 / dt
    if not 0 < cutoff_hz < nyquist:
        raise ConfigurationError(
            f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist={nyquist} Hz)"
        )
    b, a = signal.butter(2, cutoff_hz, btype="low", fs=1.0 / dt)
    b = tuple(float(v / a[0]) for v in b)
    a = tuple(float(v / a[0]) for v in a)
    return LpfState(cutoff_hz, dt, b, a)


def lpf_diff_step(s: LpfState, x1_meas: float, dt: float) -> tuple[LpfState, float]:
    """Differentiate and filter one sample; the first sample yields zero slope."""
    if abs(dt - s.dt) > 1e-12 * s.dt:
        raise ConfigurationError(f"LPF designed for dt={s.dt}, stepped with dt={dt}")
    prev = x1_meas if s.prev_x is None else s.prev_x
    d = (x1_meas - prev) / dt
    b0, b1, b2 = s.b
    _, a1, a2 = s.a
    # direct form II transposed
    y = b0 * d + s.z1
    z1 = b1 * d - a1 * y + s.z2
    z2 = b2 * d - a2 * y
    return LpfState(s.cutoff_hz, s.dt, s.b, s.a, x1_meas, z1, z2), y


class SmdDifferentiator:
    """Stateful SMD wrapper; initialises on the first sample.

    ``update(x_j)`` holds the state for ``t_j``, forms the innovation with
    ``x_j`` and takes one Euler step, so the returned velocity refers to
    ``t_j + dt``: a one-sample prediction rather than a one-sample delay.
    """

    def __init__(self, gains: SmdGains | None = None, dt: float = 1e-4):
        self.gains = gains or SmdGains()
        self.dt = dt
        self.state: SmdState | None = None

    def update(self, x1_meas: float) -> float:
        if self.state is None:
            self.state = smd_init(x1_meas)
        else:
            self.state = smd_step(self.state, x1_meas, self.gains, self.dt)
        return self.state.y1


class LpfDifferentiator:
    def __init__(self, cutoff_hz: float = 200.0, dt: float = 1e-4):
        self.dt = dt
        self.state = make_lpf(cutoff_hz, dt)

    def update(self, x1_meas: float) -> float:
        self.state, v = lpf_diff_step(self.state, x1_meas, self.dt)
        return v


def run_smd(x: np.ndarray, dt: float, gains: SmdGains | None = None) -> np.ndarray:
    """SMD state trajectory ``(n, 3)`` for a sampled signal."""
    gains = gains or SmdGains()
    out = np.empty((len(x), 3))
    s = smd_init(float(x[0]))
    out[0] = s
    for i in range(1, len(x)):
        s = smd_step(s, float(x[i]), gains, dt)
        out[i] = s
    return out


def run_lpf(x: np.ndarray, dt: float, cutoff_hz: float = 200.0) -> np.ndarray:
    s = make_lpf(cutoff_hz, dt)
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        s, out[i] = lpf_diff_step(s, float(xi), dt)
    return out


def lpf_frequency_response(omega: float, dt: float, cutoff_hz: float = 200.0) -> complex:
    """Exact response of backward difference + filter to ``exp(j omega t)``
    relative to the true derivative ``j omega exp(j omega t)``."""
    s = make_lpf(cutoff_hz, dt)
    z = np.exp(1j * omega * dt)
    diff = (1 - 1 / z) / dt
    _, h = signal.freqz(s.b, s.a, worN=[omega * dt])
    return complex(diff * h[0] / (1j * omega))


def convergence_time(t: np.ndarray, err: np.ndarray, band: float) -> float:
    """First time after which ``|err|`` stays within ``band``; ``inf`` if never."""
    outside = np.nonzero(np.abs(err) > band)[0]
    if len(outside) == 0:
        return float(t[0])
    last = outside[-1]
    if last == len(t) - 1:
        return math.inf
    return float(t[last + 1])
