"""Fixed-step closed-loop simulation.

The plant is integrated at ``dt_plant`` (RK4 or explicit Euler) while the
controller runs at ``dt_control`` with zero-order hold in between. At each
control instant the loop measures position, updates the velocity
estimator, evaluates the controller on the measured/estimated signals and
records one trace row. True states are recorded alongside for oracle checks.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .controllers import (
    ControllerSpec,
    ErrorState,
    attractor_residual,
    lyapunov_energy,
    lyapunov_rate,
    saturate,
)
from .differentiator import LpfDifferentiator, SmdDifferentiator, SmdGains
from .errors import ConfigurationError, SettlingTimeout, SimulationAborted
from .plants import (
    DisturbanceSpec,
    DoubleIntegrator,
    LagMotor,
    MotorParams,
    PlantSpec,
    State2,
    VoiceCoil,
    eval_disturbance,
    measure_position,
    ripple_force,
    sign,
)
from .signals import (
    JitterSpec,
    NoiseSpec,
    ReferenceSpec,
    eval_jitter,
    eval_reference,
    noise_array,
)

TRACE_COLUMNS = (
    "t", "r", "r_dot", "x1_true", "x2_true", "x1_meas", "v_est", "e1", "e2",
    "u_raw", "u_applied", "xi", "V", "V_rate", "attractor_residual",
)

NUMERICAL_FLOOR = 1e-12


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str = "true-state"
    smd: SmdGains = field(default_factory=SmdGains)
    cutoff_hz: float = 200.0

    def __post_init__(self):
        if self.kind not in ("true-state", "smd", "lpf"):
            raise ConfigurationError(f"unknown estimator {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    plant: PlantSpec
    controller: ControllerSpec
    initial: State2 = State2(1.0, 0.0)
    horizon: float = 1.0
    dt_plant: float = 1e-5
    dt_control: float = 1e-4
    integrator: str = "rk4"
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    jitter: JitterSpec = field(default_factory=JitterSpec)
    record_stride: int = 1

    def __post_init__(self):
        if not (self.dt_plant > 0 and self.horizon > 0):
            raise ConfigurationError("dt_plant and horizon must be > 0")
        ratio = self.dt_control / self.dt_plant
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
            raise ConfigurationError(
                f"dt_control={self.dt_control} must be an integer multiple of dt_plant={self.dt_plant}"
            )
        if self.integrator not in ("rk4", "euler"):
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if self.record_stride < 1:
            raise ConfigurationError("record_stride must be >= 1")
        if not all(math.isfinite(v) for v in self.initial):
            raise ConfigurationError(f"initial state must be finite, got {self.initial}")
        if self.controller.kind == "ond-raw" and self.initial[0] == 0.0 and self.initial[1] != 0.0:
            raise ConfigurationError("raw OND is not admissible from x1(0) = 0")
        if self.jitter.amplitude > 0 and not isinstance(self.plant, VoiceCoil):
            raise ConfigurationError("jitter only applies to the voice-coil plant")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_plant))


@dataclass
class SimTrace:
    """Column-oriented trace; every column has the same length."""

    columns: dict[str, np.ndarray]
    config: SimConfig | None = None
    status: str = "ok"

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["t"])

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = np.column_stack([self.columns[c] for c in TRACE_COLUMNS])
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in data:
                w.writerow([repr(float(v)) for v in row])
        meta = {
            "version": __version__,
            "status": self.status,
            "rows": len(self),
            "config": config_to_dict(self.config) if self.config is not None else None,
        }
        path.with_suffix(".meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n"
        )

    @classmethod
    def from_csv(cls, path: str | Path) -> "SimTrace":
        with Path(path).open() as fh:
            r = csv.reader(fh)
            header = next(r)
            if tuple(header) != TRACE_COLUMNS:
                raise ConfigurationError(f"unexpected trace header {header}")
            rows = np.array([[float(v) for v in row] for row in r])
        rows = rows.reshape(-1, len(TRACE_COLUMNS))
        return cls({c: rows[:, i] for i, c in enumerate(TRACE_COLUMNS)})


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def config_to_dict(cfg) -> dict:
    d = asdict(cfg) if is_dataclass(cfg) else dict(cfg)
    if is_dataclass(cfg) and hasattr(cfg, "plant"):
        d["plant"]["kind"] = cfg.plant.kind

    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return repr(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    return clean(d)


def _plant_fn(plant: PlantSpec):
    """Return ``f(x1, x2, u, xi) -> (dx1, dx2)`` over plain floats."""
    if isinstance(plant, DoubleIntegrator):
        def f(x1, x2, u, xi):
            return x2, u + xi
    elif isinstance(plant, LagMotor):
        K, tau = plant.params.K, plant.params.tau

        def f(x1, x2, u, xi):
            return x2, (K * (u + xi) - x2) / tau
    elif isinstance(plant, VoiceCoil):
        p = plant.params
        m, Ku, sigma, mg, cou, fixed = p.mass, p.Ku, p.sigma, p.mass * p.g, p.coulomb, p.xi_const

        def f(x1, x2, U, xi):
            force = Ku * U - mg - ripple_force(x1, p) - cou * sign(x2) + fixed + xi
            return x2, (force - sigma * x2) / m
    else:
        raise ConfigurationError(f"unknown plant {plant!r}")
    return f


def _step_rk4(f, x1, x2, u, xi, h):
    a1, b1 = f(x1, x2, u, xi)
    a2, b2 = f(x1 + 0.5 * h * a1, x2 + 0.5 * h * b1, u, xi)
    a3, b3 = f(x1 + 0.5 * h * a2, x2 + 0.5 * h * b2, u, xi)
    a4, b4 = f(x1 + h * a3, x2 + h * b3, u, xi)
    return (x1 + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4),
            x2 + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4))


def _step_euler(f, x1, x2, u, xi, h):
    a, b = f(x1, x2, u, xi)
    return x1 + h * a, x2 + h * b


def integrate_plant(plant: PlantSpec, x0: State2, u: float, duration: float,
                    dt: float, integrator: str = "rk4", xi: float = 0.0) -> State2:
    """Integrate the plant under constant input ``u`` (used by oracles and sysid)."""
    f = _plant_fn(plant)
    step = _step_rk4 if integrator == "rk4" else _step_euler
    n = int(round(duration / dt))
    x1, x2 = x0
    for _ in range(n):
        x1, x2 = step(f, x1, x2, u, xi, dt)
    return State2(x1, x2)


def run_closed_loop(cfg: SimConfig) -> SimTrace:
    f = _plant_fn(cfg.plant)
    step = _step_rk4 if cfg.integrator == "rk4" else _step_euler
    ctrl = cfg.controller
    bound = ctrl.bound
    k_diag, mu_diag = ctrl.diag_gain, ctrl.diag_mu
    vc = cfg.plant.params if isinstance(cfg.plant, VoiceCoil) else None
    n_ctrl = int(round(cfg.horizon / cfg.dt_control))
    n_sub = cfg.substeps
    h = cfg.dt_plant
    dt_c = cfg.dt_control
    noise = noise_array(cfg.noise, n_ctrl + 1).tolist()

    est_kind = cfg.estimator.kind
    if est_kind == "smd":
        estimator = SmdDifferentiator(cfg.estimator.smd, dt_c)
    elif est_kind == "lpf":
        estimator = LpfDifferentiator(cfg.estimator.cutoff_hz, dt_c)
    else:
        estimator = None

    rows = {c: [] for c in TRACE_COLUMNS}
    x1, x2 = float(cfg.initial[0]), float(cfg.initial[1])

    def trace(status="ok"):
        cols = {c: np.asarray(v, dtype=float) for c, v in rows.items()}
        return SimTrace(cols, cfg, status)

    for n in range(n_ctrl + 1):
        t = n * dt_c
        r, r_dot = eval_reference(cfg.reference, t)
        y = measure_position((x1, x2), vc, noise[n])
        v = x2 if estimator is None else estimator.update(y)
        u_raw = ctrl.command(r, r_dot, y, v)
        u = saturate(u_raw, bound)
        xi = eval_disturbance(cfg.disturbance, t, n)
        if n % cfg.record_stride == 0:
            e = ErrorState(y - r, v - r_dot)
            rows["t"].append(t)
            rows["r"].append(r)
            rows["r_dot"].append(r_dot)
            rows["x1_true"].append(x1)
            rows["x2_true"].append(x2)
            rows["x1_meas"].append(y)
            rows["v_est"].append(v)
            rows["e1"].append(e.e1)
            rows["e2"].append(e.e2)
            rows["u_raw"].append(u_raw)
            rows["u_applied"].append(u)
            rows["xi"].append(xi)
            rows["V"].append(lyapunov_energy(e, k_diag))
            rows["V_rate"].append(lyapunov_rate(e, mu_diag))
            rows["attractor_residual"].append(attractor_residual(e.e1, e.e2, k_diag))
        if n == n_ctrl:
            break
        if vc is not None:
            U = eval_jitter(cfg.jitter, t) + vc.gravity_bias + u
            if vc.voltage_range is not None:
                U = min(max(U, vc.voltage_range[0]), vc.voltage_range[1])
        else:
            U = u
        for _ in range(n_sub):
            x1, x2 = step(f, x1, x2, U, xi, h)
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise SimulationAborted(
                f"non-finite state (x1={x1}, x2={x2}) at t={t + dt_c:.6g}", trace("aborted")
            )
    return trace()


def double_integrator_config(controller: ControllerSpec, x0=(1.0, 0.0), horizon=2.0,
                             dt_plant=1e-5, dt_control=1e-4, **kw) -> SimConfig:
    return SimConfig(plant=DoubleIntegrator(), controller=controller,
                     initial=State2(*x0), horizon=horizon, dt_plant=dt_plant,
                     dt_control=dt_control, **kw)


@dataclass
class ConvergenceReport:
    ond: SimTrace
    pd: SimTrace
    log_ond: np.ndarray
    log_pd: np.ndarray
    crossover_time: float | None
    floor: float = NUMERICAL_FLOOR


def censored_log10(x: np.ndarray, floor: float = NUMERICAL_FLOOR) -> np.ndarray:
    a = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        out = np.log10(a)
    out[a < floor] = np.nan
    return out


def crossover_time(t, ond_abs, pd_abs, floor=NUMERICAL_FLOOR) -> float | None:
    """Time after which OND's |x1| stays strictly below PD's.

    Only samples where OND is still above the floor are compared (below it
    OND counts as better). ``None`` if OND is not ahead at the end of the
    compared range.
    """
    t = np.asarray(t)
    active = ond_abs >= floor
    if not active.any():
        return float(t[0])
    idx = np.nonzero(active)[0]
    behind = idx[ond_abs[idx] >= pd_abs[idx]]
    if len(behind) == 0:
        return float(t[0])
    last = behind[-1]
    if last == idx[-1]:
        return None
    return float(t[last + 1])


def run_convergence_benchmark(k: float = 100.0, mu: float = 1e-4, pd_tau: float | None = None,
                              x0=(1.0, 0.0), horizon: float = 3.0,
                              dt_plant: float = 1e-5, dt_control: float = 1e-4) -> ConvergenceReport:
    """OND versus critically damped PD on the double integrator.

    ``mu = 0`` selects the raw OND law.
    """
    if pd_tau is None:
        pd_tau = 2.0 / math.sqrt(k)
    if mu == 0:
        ond_ctrl = ControllerSpec.ond_raw(k)
    else:
        ond_ctrl = ControllerSpec.ond_regularized(k, mu)
    kw = dict(x0=x0, horizon=horizon, dt_plant=dt_plant, dt_control=dt_control)
    ond = run_closed_loop(double_integrator_config(ond_ctrl, **kw))
    pd = run_closed_loop(double_integrator_config(ControllerSpec.pd_law(k, pd_tau), **kw))
    a_ond, a_pd = np.abs(ond["x1_true"]), np.abs(pd["x1_true"])
    if not a_ond.any() and not a_pd.any():
        cross = float(ond["t"][0])
    else:
        cross = crossover_time(ond["t"], a_ond, a_pd)
    return ConvergenceReport(ond, pd, censored_log10(a_ond), censored_log10(a_pd), cross)


def run_disturbance_steady_state(k: float, xi: float, plant: MotorParams, *, mu: float = 1e-4,
                                 horizon: float = 30.0, dt_plant: float = 1e-4,
                                 dt_control: float = 1e-4, settle_tol: float = 1e-9,
                                 settle_window: float = 0.5) -> float:
    """Terminal ``x1`` of the scaled-OND motor loop under constant ``xi``.

    Settled means ``|x2| < settle_tol`` over a trailing ``settle_window``.
    Raises :class:`SettlingTimeout` (carrying the terminal ``x1``) when the
    horizon ends first.
    """
    ctrl = ControllerSpec.ond_scaled(k, plant.tau, plant.K, mu=mu)
    cfg = SimConfig(plant=LagMotor(plant), controller=ctrl, initial=State2(0.0, 0.0),
                    horizon=horizon, dt_plant=dt_plant, dt_control=dt_control,
                    disturbance=DisturbanceSpec("constant", magnitude=xi))
    tr = run_closed_loop(cfg)
    t, x2 = tr["t"], np.abs(tr["x2_true"])
    terminal = float(tr["x1_true"][-1])
    quiet = x2 < settle_tol
    loud = np.nonzero(~quiet)[0]
    start = 0 if len(loud) == 0 else loud[-1] + 1
    if start < len(t) and t[-1] - t[start] >= settle_window:
        return terminal
    raise SettlingTimeout(
        f"|x2| did not stay below {settle_tol} for {settle_window} s within {horizon} s "
        f"(final |x2| = {x2[-1]:.3g})",
        terminal, tr,
    )
