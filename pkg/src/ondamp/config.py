"""TOML run configuration.

A config file selects scenarios, fixes the seed and output directory,
overrides scenario parameters and optionally describes a ``custom`` closed
loop and identification settings. See ``configs/example.toml`` for an
annotated example. Errors name the offending field and, where it can be
located, its line in the file.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controllers import ControllerSpec, OndGains, PdGains
from .differentiator import SmdGains
from .errors import ConfigurationError
from .plants import (
    DisturbanceSpec,
    DoubleIntegrator,
    IDENTIFIED_MOTOR,
    LagMotor,
    MotorParams,
    State2,
    VoiceCoil,
    VoiceCoilParams,
    voice_coil_lab,
)
from .scenarios import SCENARIOS, merge_params
from .signals import JitterSpec, NoiseSpec, ReferenceSpec
from .sim import EstimatorSpec, SimConfig
from .sysid import IdConfig


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one scenario."""

    name: str
    seed: int = 0
    output_dir: Path = Path("runs")
    params: dict = field(default_factory=dict)
    sim: SimConfig | None = None
    sysid: IdConfig | None = None


@dataclass(frozen=True)
class RunConfig:
    """Parsed config file."""

    scenarios: tuple[str, ...] = ()
    seed: int = 0
    output_dir: Path = Path("runs")
    overrides: dict = field(default_factory=dict)
    sim: SimConfig | None = None
    sysid: IdConfig | None = None

    def scenario(self, name: str) -> ScenarioConfig:
        return ScenarioConfig(name, self.seed, self.output_dir,
                              dict(self.overrides.get(name, {})), self.sim, self.sysid)


class _Reader:
    """Typed access to a TOML table that remembers where each field lives."""

    def __init__(self, table: dict, path: str, locate):
        self.table = table
        self.path = path
        self.locate = locate
        self.used: set[str] = set()

    def _where(self, key: str | None = None) -> str:
        dotted = f"{self.path}.{key}" if self.path and key else (key or self.path or "<root>")
        line = self.locate(dotted)
        return f"{dotted} (line {line})" if line else dotted

    def fail(self, key: str | None, msg: str):
        raise ConfigurationError(f"{self._where(key)}: {msg}")

    def has(self, key: str) -> bool:
        return key in self.table

    def raw(self, key: str, default=None):
        self.used.add(key)
        return self.table.get(key, default)

    def number(self, key: str, default=None) -> float | None:
        v = self.raw(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(key, f"expected a number, got {v!r}")
        return float(v)

    def integer(self, key: str, default=None) -> int | None:
        v = self.raw(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(key, f"expected an integer, got {v!r}")
        return v

    def string(self, key: str, default=None, choices=None) -> str | None:
        v = self.raw(key, default)
        if v is None:
            return None
        if not isinstance(v, str):
            self.fail(key, f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            self.fail(key, f"expected one of {', '.join(choices)}, got {v!r}")
        return v

    def numbers(self, key: str, length: int | None = None, default=None):
        v = self.raw(key)
        if v is None:
            return default
        if not isinstance(v, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
        ):
            self.fail(key, f"expected a list of numbers, got {v!r}")
        if length is not None and len(v) != length:
            self.fail(key, f"expected {length} numbers, got {len(v)}")
        return tuple(float(x) for x in v)

    def pairs(self, key: str) -> tuple[tuple[float, float], ...]:
        v = self.raw(key, [])
        if not isinstance(v, list) or not all(
            isinstance(p, list) and len(p) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in p)
            for p in v
        ):
            self.fail(key, f"expected a list of [t, value] pairs, got {v!r}")
        return tuple((float(a), float(b)) for a, b in v)

    def sub(self, key: str) -> "_Reader":
        v = self.raw(key, {})
        if not isinstance(v, dict):
            self.fail(key, "expected a table")
        return _Reader(v, f"{self.path}.{key}" if self.path else key, self.locate)

    def done(self):
        extra = sorted(set(self.table) - self.used)
        if extra:
            self.fail(extra[0], f"unknown field (allowed: {', '.join(sorted(self.used)) or 'none'})")

    def build(self, fn, *args, **kw):
        """Call a constructor, re-raising its validation error with this location."""
        try:
            return fn(*args, **kw)
        except ConfigurationError as exc:
            self.fail(None, str(exc))


_HEADER = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?\s*(#.*)?$")
_KEY = re.compile(r'^\s*("[^"]*"|[A-Za-z0-9_\-]+)\s*=')


def _line_locator(text: str):
    """Map dotted field paths to 1-based line numbers (best effort)."""
    where: dict[str, int] = {}
    section = ""
    for n, line in enumerate(text.splitlines(), 1):
        m = _HEADER.match(line)
        if m:
            section = ".".join(p.strip().strip('"') for p in _split_dotted(m.group(1)))
            where.setdefault(section, n)
            continue
        m = _KEY.match(line)
        if m:
            key = m.group(1).strip('"')
            where.setdefault(f"{section}.{key}" if section else key, n)
    return where.get


def _split_dotted(s: str) -> list[str]:
    return re.findall(r'"[^"]*"|[^.]+', s)


def _plant(r: _Reader):
    kind = r.string("kind", "double-integrator",
                    ("double-integrator", "lag-motor", "voice-coil"))
    if kind == "double-integrator":
        r.done()
        return DoubleIntegrator()
    motor = r.build(MotorParams, r.number("K", IDENTIFIED_MOTOR.K),
                    r.number("tau", IDENTIFIED_MOTOR.tau))
    if kind == "lag-motor":
        r.done()
        return LagMotor(motor)
    preset = r.string("preset", "voice-coil-lab", ("voice-coil-lab", "ideal"))
    base = voice_coil_lab() if preset == "voice-coil-lab" else VoiceCoilParams()
    kw = {"motor": motor}
    for name in ("mass", "Ku", "g", "ripple_amplitude", "ripple_period", "coulomb",
                 "stroke_limit", "xi_const"):
        if r.has(name):
            kw[name] = r.number(name)
    if r.has("voltage_range"):
        kw["voltage_range"] = r.numbers("voltage_range", 2)
    r.done()
    fields = {**base.__dict__, **kw}
    return VoiceCoil(r.build(VoiceCoilParams, **fields))


def _controller(r: _Reader) -> ControllerSpec:
    kind = r.string("kind", "ond-regularized", ("ond-raw", "ond-regularized", "ond-scaled", "pd"))
    S = r.number("S")
    if kind == "pd":
        g = r.build(PdGains, r.number("gamma", 1000.0), r.number("tau", IDENTIFIED_MOTOR.tau), S)
        r.done()
        return ControllerSpec("pd", pd=g)
    k = r.number("k", 100.0)
    mu = 0.0 if kind == "ond-raw" else r.number("mu", 1e-4)
    tau = Kg = None
    if kind == "ond-scaled":
        tau = r.number("tau", IDENTIFIED_MOTOR.tau)
        Kg = r.number("Kg", IDENTIFIED_MOTOR.K)
    r.done()
    g = r.build(OndGains, k, mu, tau, Kg, S)
    return r.build(ControllerSpec, kind, ond=g)


def _estimator(r: _Reader) -> EstimatorSpec:
    kind = r.string("kind", "true-state", ("true-state", "smd", "lpf"))
    d = SmdGains()
    gains = r.build(SmdGains, r.number("k0", d.k0), r.number("k1", d.k1),
                    r.number("k2", d.k2), r.number("rho", d.rho))
    cutoff = r.number("cutoff_hz", 200.0)
    r.done()
    return EstimatorSpec(kind, gains, cutoff)


def _reference(r: _Reader) -> ReferenceSpec:
    kind = r.string("kind", "constant",
                    ("step", "slope", "piecewise-linear", "sinusoid", "constant"))
    spec = r.build(ReferenceSpec, kind, amplitude=r.number("amplitude", 0.0),
                   frequency=r.number("frequency", 0.0), slope_rate=r.number("slope_rate", 0.0),
                   breakpoints=r.pairs("breakpoints"), offset=r.number("offset", 0.0),
                   step_time=r.number("step_time", 0.0))
    r.done()
    return spec


def _disturbance(r: _Reader, seed: int) -> DisturbanceSpec:
    kind = r.string("kind", "none", ("none", "constant", "pulse", "manual-profile"))
    window = r.numbers("window", 2, (0.0, float("inf")))
    spec = r.build(DisturbanceSpec, kind, r.number("magnitude", 0.0), window,
                   r.pairs("profile"), r.number("process_std", 0.0),
                   r.integer("seed", seed + 1))
    r.done()
    return spec


def _sim(r: _Reader, seed: int) -> SimConfig:
    plant = _plant(r.sub("plant"))
    ctrl = _controller(r.sub("controller"))
    est = _estimator(r.sub("estimator"))
    ref = _reference(r.sub("reference"))
    dist = _disturbance(r.sub("disturbance"), seed)
    nr = r.sub("noise")
    noise = nr.build(NoiseSpec, nr.number("sensor_std", 0.0), nr.integer("seed", seed))
    nr.done()
    jr = r.sub("jitter")
    jitter = jr.build(JitterSpec, jr.number("amplitude", 0.0), jr.number("frequency", 450.0))
    jr.done()
    cfg = r.build(
        SimConfig, plant=plant, controller=ctrl,
        initial=State2(*r.numbers("initial", 2, (1.0, 0.0))),
        horizon=r.number("horizon", 1.0), dt_plant=r.number("dt_plant", 1e-5),
        dt_control=r.number("dt_control", 1e-4),
        integrator=r.string("integrator", "rk4", ("rk4", "euler")),
        estimator=est, reference=ref, disturbance=dist, noise=noise, jitter=jitter,
        record_stride=r.integer("record_stride", 1),
    )
    r.done()
    return cfg


def _sysid(r: _Reader) -> IdConfig:
    d = IdConfig()
    freqs = d.frequencies
    if r.has("frequencies"):
        v = r.table["frequencies"]
        if isinstance(v, dict):
            fr = r.sub("frequencies")
            lo, hi, n = fr.number("min"), fr.number("max"), fr.integer("count")
            if None in (lo, hi, n) or lo <= 0 or hi <= lo or n < 2:
                fr.fail(None, "needs 0 < min < max and count >= 2")
            fr.done()
            freqs = tuple(np.logspace(np.log10(lo), np.log10(hi), n))
        else:
            freqs = r.numbers("frequencies")
    cfg = r.build(
        IdConfig, k_id=r.number("k_id", d.k_id), r0=r.number("r0", d.r0), a=r.number("a", d.a),
        frequencies=freqs, settle_cycles=r.integer("settle_cycles", d.settle_cycles),
        measure_cycles=r.integer("measure_cycles", d.measure_cycles),
        settle_time=r.number("settle_time", d.settle_time), dt_max=r.number("dt_max", d.dt_max),
        samples_per_cycle=r.integer("samples_per_cycle", d.samples_per_cycle),
        max_excursion=r.number("max_excursion", d.max_excursion),
        kd_id=r.number("kd_id", d.kd_id),
    )
    r.done()
    return cfg


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse TOML text into a :class:`RunConfig`."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    locate = _line_locator(text)
    r = _Reader(data, "", locate)
    try:
        seed = r.integer("seed", 0)
        out = Path(r.string("output_dir", "runs"))
        sel = r.raw("scenarios", [])
        if isinstance(sel, str):
            sel = [sel]
        if not isinstance(sel, list) or not all(isinstance(s, str) for s in sel):
            r.fail("scenarios", f"expected a list of selector strings, got {sel!r}")
        overrides = {}
        sc = r.sub("scenario")
        for name in sc.table:
            if not isinstance(sc.table[name], dict):
                sc.fail(name, "expected a table of parameter overrides")
            if name not in SCENARIOS:
                sc.fail(name, f"unknown scenario (known: {', '.join(SCENARIOS)})")
            overrides[name] = dict(sc.raw(name))
            sc.sub(name).build(merge_params, SCENARIOS[name], overrides[name])
        sim = _sim(r.sub("custom"), seed) if r.has("custom") else None
        idcfg = _sysid(r.sub("sysid")) if r.has("sysid") else None
        r.done()
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    return RunConfig(tuple(sel), seed, out, overrides, sim, idcfg)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
