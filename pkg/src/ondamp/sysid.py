"""Closed-loop frequency-response identification and PD gain tuning.

Pipeline: excite the plant inside a proportional centering loop
``u = k_id (r0 - x1) + a sin(w t)``, demodulate ``x1`` and ``u`` at ``w``
over an integer number of cycles, fit ``K / (s (tau s + 1))`` to the
magnitude data, then read crossover frequency and phase margin of the
PD-shaped open loop ``gamma (1 + tau s) G(s)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .errors import (
    ConfigurationError,
    DegenerateDataError,
    InstabilityError,
    OutOfRangeError,
)
from .plants import PlantSpec, VoiceCoil
from .sim import _plant_fn, _step_rk4


class FRPoint(NamedTuple):
    omega: float
    magnitude: float
    phase: float  # rad, unwrapped

    @property
    def magnitude_db(self) -> float:
        return 20.0 * math.log10(self.magnitude)


@dataclass(frozen=True)
class IdConfig:
    """Identification-loop settings.

    ``k_id`` and ``a`` have no canonical values; the defaults suit the
    identified motor. ``settle_time`` adds a floor (s) to the settle
    duration so that slow loop modes decay at high excitation frequencies.
    ``kd_id`` adds optional velocity feedback for plants that a
    proportional loop cannot damp (the double integrator); the ratio is
    always taken against the total input, so it does not bias the result.
    """

    k_id: float = 300.0
    r0: float = 0.006
    a: float = 1.0
    frequencies: tuple[float, ...] = tuple(np.logspace(0, 3, 20))
    settle_cycles: int = 2
    measure_cycles: int = 3
    settle_time: float = 1.0
    dt_max: float = 1e-4
    samples_per_cycle: int = 200
    max_excursion: float = 1.0
    kd_id: float = 0.0

    def __post_init__(self):
        fr = tuple(float(w) for w in self.frequencies)
        if not fr or min(fr) <= 0 or any(b <= a for a, b in zip(fr, fr[1:])):
            raise ConfigurationError("frequencies must be positive and strictly increasing")
        object.__setattr__(self, "frequencies", fr)
        if self.settle_cycles < 1:
            raise ConfigurationError("settle_cycles must be >= 1")
        if self.measure_cycles < 1:
            raise ConfigurationError("measure window must cover at least one period")


def demodulate(x: np.ndarray, t: np.ndarray, omega: float) -> complex:
    """First-harmonic phasor of ``x`` at ``omega`` over whole cycles."""
    return complex(np.mean(x * np.exp(-1j * omega * t)) * 2.0)


def _measure_one(plant: PlantSpec, cfg: IdConfig, omega: float) -> complex:
    period = 2.0 * math.pi / omega
    per_cycle = max(cfg.samples_per_cycle, math.ceil(period / cfg.dt_max))
    dt = period / per_cycle
    n_settle = max(cfg.settle_cycles, math.ceil(cfg.settle_time / period)) * per_cycle
    n_meas = cfg.measure_cycles * per_cycle
    f = _plant_fn(plant)
    bias = plant.params.gravity_bias if isinstance(plant, VoiceCoil) else 0.0
    x1, x2 = cfg.r0, 0.0
    xs = np.empty(n_meas)
    us = np.empty(n_meas)
    k_id, kd, r0, a = cfg.k_id, cfg.kd_id, cfg.r0, cfg.a
    for i in range(n_settle + n_meas):
        t = i * dt
        u = k_id * (r0 - x1) - kd * x2 + a * math.sin(omega * t)
        if i >= n_settle:
            j = i - n_settle
            xs[j] = x1
            us[j] = u
        x1, x2 = _step_rk4(f, x1, x2, u + bias, 0.0, dt)
        if not math.isfinite(x1) or abs(x1 - r0) > cfg.max_excursion:
            raise InstabilityError(
                f"identification loop diverged at omega={omega:.4g} rad/s (x1={x1:.3g})"
            )
    t_meas = (n_settle + np.arange(n_meas)) * dt
    # the plant sees u held over each step: fold the hold response into the input phasor
    hold = (1.0 - np.exp(-1j * omega * dt)) / (1j * omega * dt)
    return demodulate(xs, t_meas, omega) / (demodulate(us, t_meas, omega) * hold)


def measure_fr(plant: PlantSpec, cfg: IdConfig) -> list[FRPoint]:
    """Frequency response ``x1(jw) / u(jw)`` of the plant at each ``cfg`` frequency."""
    ratios = [_measure_one(plant, cfg, w) for w in cfg.frequencies]
    phases = np.unwrap([np.angle(h) for h in ratios])
    # the free integrator fixes the branch: low-frequency phase near -pi/2
    shift = 2 * math.pi * round((phases[0] + math.pi / 2) / (2 * math.pi))
    return [FRPoint(w, abs(h), float(p - shift))
            for w, h, p in zip(cfg.frequencies, ratios, phases)]


def model_response(omega, K: float, tau: float, theta: float = 0.0):
    """``K e^{-theta s} / (s (tau s + 1))`` at ``s = j omega``."""
    s = 1j * np.asarray(omega, dtype=float)
    return K * np.exp(-theta * s) / (s * (tau * s + 1.0))


@dataclass(frozen=True)
class FitResult:
    K: float
    tau: float
    excluded_points: tuple[float, ...] = ()
    residual: float = 0.0


def exclude_low_frequency(points: Sequence[FRPoint], tol: float = 0.15) -> list[FRPoint]:
    """Leading points whose forward log-log magnitude slope is not -1 within ``tol``."""
    excluded = []
    for p, q in zip(points, points[1:]):
        slope = (math.log10(q.magnitude) - math.log10(p.magnitude)) / (
            math.log10(q.omega) - math.log10(p.omega))
        if abs(slope + 1.0) <= tol:
            break
        excluded.append(p)
    return excluded


def fit_model(points: Sequence[FRPoint], *, slope_tol: float = 0.15,
              use_phase: bool = False) -> FitResult:
    """Least-squares fit of ``K / (s (tau s + 1))`` in log-magnitude."""
    points = sorted(points, key=lambda p: p.omega)
    if len(points) < 4 or math.log10(points[-1].omega / points[0].omega) < 1.0 - 1e-12:
        raise DegenerateDataError("need >= 4 points spanning at least one decade")
    excluded = exclude_low_frequency(points, slope_tol)
    used = points[len(excluded):]
    if len(used) < 2:
        raise DegenerateDataError("all frequency-response points were excluded")
    w = np.array([p.omega for p in used])
    logm = np.log10([p.magnitude for p in used])
    ph = np.array([p.phase for p in used])

    def residuals(theta):
        K, tau = 10.0 ** theta[0], 10.0 ** theta[1]
        model = model_response(w, K, tau)
        res = np.log10(np.abs(model)) - logm
        if use_phase:
            res = np.concatenate([res, np.angle(model * np.exp(-1j * ph))])
        return res

    K0 = float(np.median(np.array([p.magnitude for p in used]) * w))
    tau0 = 1.0 / float(np.sqrt(w[0] * w[-1]))
    sol = optimize.least_squares(residuals, [math.log10(K0), math.log10(tau0)],
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15)
    K, tau = 10.0 ** sol.x[0], 10.0 ** sol.x[1]
    return FitResult(float(K), float(tau), tuple(p.omega for p in excluded),
                     float(np.sum(sol.fun ** 2)))


@dataclass(frozen=True)
class NominalModel:
    """Analytic plant ``K e^{-theta s} / (s (tau s + 1))``."""

    K: float
    tau: float
    theta: float = 0.0

    def response(self, omega):
        return model_response(omega, self.K, self.tau, self.theta)


class Margin(NamedTuple):
    omega_c: float
    margin: float  # rad


def _pd_phase(omega, tau):
    return np.arctan(tau * np.asarray(omega))


def crossover_margin(source, gamma: float, tau: float) -> Margin:
    """Crossover of ``gamma (1 + tau j w) FR(j w)`` and the phase margin
    ``pi + angle FR(w_c) + angle PD(w_c)``.

    ``source`` is a :class:`NominalModel` or a sequence of :class:`FRPoint`.
    """
    if isinstance(source, NominalModel):
        def log_gain(lw):
            w = 10.0 ** lw
            return math.log10(gamma * abs(1 + 1j * tau * w) * abs(source.response(w)))

        lo, hi = -8.0, 9.0
        if not log_gain(lo) > 0 > log_gain(hi):
            raise OutOfRangeError("open loop has no unity crossing")
        lw = optimize.brentq(log_gain, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        wc = 10.0 ** lw
        fr_phase = -math.pi / 2 - math.atan(source.tau * wc) - source.theta * wc
        return Margin(float(wc), float(math.pi + fr_phase + math.atan(tau * wc)))

    pts = sorted(source, key=lambda p: p.omega)
    w = np.array([p.omega for p in pts])
    lg = np.log10(gamma * np.abs(1 + 1j * tau * w) * np.array([p.magnitude for p in pts]))
    ph = np.array([p.phase for p in pts])
    idx = np.nonzero((lg[:-1] >= 0) & (lg[1:] < 0))[0]
    if len(idx) == 0:
        raise OutOfRangeError("open loop does not cross unity inside the data range")
    i = idx[0]
    lw0, lw1 = math.log10(w[i]), math.log10(w[i + 1])
    frac = lg[i] / (lg[i] - lg[i + 1])
    lwc = lw0 + frac * (lw1 - lw0)
    wc = 10.0 ** lwc
    fr_phase = ph[i] + frac * (ph[i + 1] - ph[i])
    return Margin(float(wc), float(math.pi + fr_phase + math.atan(tau * wc)))


class TuneResult(NamedTuple):
    gamma: float
    omega_c: float
    margin: float
    at_bound: bool


def tune_gamma(source, target_margin: float, tau: float, *,
               gamma_bounds: tuple[float, float] = (1.0, 1e5),
               tol: float = math.radians(0.5)) -> TuneResult:
    """Bisect (in log gamma) for the gain giving ``target_margin``.

    The margin does not grow with gamma. If even ``gamma_max`` meets the
    target, it is returned with ``at_bound=True``.
    """
    g_lo, g_hi = gamma_bounds
    m_hi = crossover_margin(source, g_hi, tau)
    if m_hi.margin >= target_margin - tol:
        return TuneResult(g_hi, m_hi.omega_c, m_hi.margin, True)
    m_lo = crossover_margin(source, g_lo, tau)
    if m_lo.margin < target_margin - tol:
        raise OutOfRangeError(
            f"target margin {math.degrees(target_margin):.1f} deg unreachable "
            f"(best {math.degrees(m_lo.margin):.1f} deg at gamma={g_lo})"
        )
    lo, hi = math.log10(g_lo), math.log10(g_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m = crossover_margin(source, 10.0 ** mid, tau)
        if abs(m.margin - target_margin) < tol and hi - lo < 1e-6:
            break
        if m.margin > target_margin:
            lo = mid
        else:
            hi = mid
    g = 10.0 ** (0.5 * (lo + hi))
    m = crossover_margin(source, g, tau)
    return TuneResult(g, m.omega_c, m.margin, False)


def write_fr_csv(points: Sequence[FRPoint], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "magnitude", "phase_deg"])
        for p in points:
            w.writerow([repr(p.omega), repr(p.magnitude), repr(math.degrees(p.phase))])


def read_fr_csv(path: str | Path) -> list[FRPoint]:
    with Path(path).open() as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["omega", "magnitude", "phase_deg"]:
            raise ConfigurationError(f"unexpected FR header {r.fieldnames}")
        return [FRPoint(float(row["omega"]), float(row["magnitude"]),
                        math.radians(float(row["phase_deg"]))) for row in r]


def synthetic_points(K: float, tau: float, frequencies, theta: float = 0.0) -> list[FRPoint]:
    h = model_response(frequencies, K, tau, theta)
    ph = np.unwrap(np.angle(h))
    ph -= 2 * math.pi * round((ph[0] + math.pi / 2) / (2 * math.pi))
    return [FRPoint(float(w), float(abs(v)), float(p)) for w, v, p in zip(frequencies, h, ph)]
