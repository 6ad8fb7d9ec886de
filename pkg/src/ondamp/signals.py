"""Reference trajectories, jitter dither, and seeded sensor noise.

All functions here are pure: the same arguments always give the same
result, so they are safe to share between concurrent scenario runs.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

REFERENCE_KINDS = ("step", "slope", "piecewise-linear", "sinusoid", "constant")


@dataclass(frozen=True)
class ReferenceSpec:
    """Reference trajectory r(t).

    Only the fields relevant to ``kind`` are read. ``step_time`` is the
    switching instant of a step; the post-step value is returned at that
    instant.
    """

    kind: str = "constant"
    amplitude: float = 0.0
    frequency: float = 0.0
    slope_rate: float = 0.0
    breakpoints: tuple[tuple[float, float], ...] = ()
    offset: float = 0.0
    step_time: float = 0.0

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ConfigurationError(f"unknown reference kind {self.kind!r}")
        if self.kind == "sinusoid" and not self.frequency > 0:
            raise ConfigurationError("sinusoid reference needs frequency > 0")
        if self.kind == "slope" and not math.isfinite(self.slope_rate):
            raise ConfigurationError("slope_rate must be finite")
        if self.kind == "piecewise-linear":
            bps = tuple((float(t), float(v)) for t, v in self.breakpoints)
            if len(bps) < 1:
                raise ConfigurationError("piecewise-linear reference needs breakpoints")
            times = [t for t, _ in bps]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigurationError(
                    f"breakpoint times must be strictly increasing, got {times}"
                )
            object.__setattr__(self, "breakpoints", bps)


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian position-sensor noise with a deterministic stream."""

    sensor_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sensor_std < 0:
            raise ConfigurationError("sensor_std must be >= 0")


@dataclass(frozen=True)
class JitterSpec:
    """Square-wave voltage dither used against magnetic stiction."""

    amplitude: float = 0.0
    frequency: float = 450.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigurationError("jitter amplitude must be >= 0")
        if not self.frequency > 0:
            raise ConfigurationError("jitter frequency must be > 0")


def eval_reference(spec: ReferenceSpec, t: float) -> tuple[float, float]:
    """Return ``(r, r_dot)`` at time ``t``.

    Step references report ``r_dot = 0`` everywhere, including the
    switching instant. Piecewise-linear references hold their end values
    outside the breakpoint range and use the right-hand slope on a
    breakpoint.
    """
    kind = spec.kind
    if kind == "constant":
        return spec.offset, 0.0
    if kind == "step":
        r = spec.offset + (spec.amplitude if t >= spec.step_time else 0.0)
        return r, 0.0
    if kind == "slope":
        return spec.offset + spec.slope_rate * t, spec.slope_rate
    if kind == "sinusoid":
        w = spec.frequency
        return (
            spec.offset + spec.amplitude * math.sin(w * t),
            spec.amplitude * w * math.cos(w * t),
        )
    # piecewise-linear
    bps = spec.breakpoints
    times = [b[0] for b in bps]
    if t < times[0]:
        return spec.offset + bps[0][1], 0.0
    i = bisect.bisect_right(times, t) - 1
    if i >= len(bps) - 1:
        return spec.offset + bps[-1][1], 0.0
    (t0, v0), (t1, v1) = bps[i], bps[i + 1]
    rate = (v1 - v0) / (t1 - t0)
    return spec.offset + v0 + rate * (t - t0), rate


def eval_jitter(spec: JitterSpec, t: float) -> float:
    """Square wave of ``±amplitude``, starting at ``+amplitude`` for t = 0."""
    if spec.amplitude == 0.0:
        return 0.0
    half_period = math.pi / spec.frequency
    n = math.floor(t / half_period)
    return spec.amplitude if n % 2 == 0 else -spec.amplitude


_BLOCK = 4096


@lru_cache(maxsize=64)
def _noise_block(seed: int, block: int) -> np.ndarray:
    rng = np.random.default_rng([seed, block])
    return rng.standard_normal(_BLOCK)


def sample_noise(spec: NoiseSpec, step_index: int) -> float:
    """Noise sample number ``step_index`` of the stream keyed by ``spec.seed``."""
    if spec.sensor_std == 0.0:
        return 0.0
    if step_index < 0:
        raise ValueError("step_index must be >= 0")
    block, offset = divmod(step_index, _BLOCK)
    return spec.sensor_std * float(_noise_block(int(spec.seed), block)[offset])


def noise_array(spec: NoiseSpec, n: int) -> np.ndarray:
    """First ``n`` samples of the stream, identical to repeated ``sample_noise``."""
    if spec.sensor_std == 0.0:
        return np.zeros(n)
    nblocks = -(-n // _BLOCK)
    raw = np.concatenate([_noise_block(int(spec.seed), b) for b in range(nblocks)])
    return spec.sensor_std * raw[:n]
