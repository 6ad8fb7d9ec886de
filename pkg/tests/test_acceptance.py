"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Tolerances are the stated ones. Some criteria do not hold for the model as
implemented; those tests fail and print the measured values.
"""

import math
import time

import numpy as np
import pytest
import sympy as sp

from ondamp.controllers import ControllerSpec, ErrorState, convergence_form
from ondamp.differentiator import lpf_frequency_response
from ondamp.errors import SettlingTimeout
from ondamp.plants import IDENTIFIED_MOTOR, LagMotor, State2
from ondamp.scenarios import compare_estimators, monte_carlo_fit, run_scenario
from ondamp.signals import ReferenceSpec
from ondamp.sim import (
    SimConfig,
    double_integrator_config,
    run_closed_loop,
    run_convergence_benchmark,
    run_disturbance_steady_state,
)
from ondamp.sysid import IdConfig, NominalModel, crossover_margin, fit_model, measure_fr

K_GAIN, MU = 100.0, 1e-4


def report(capsys, number, passed, detail):
    with capsys.disabled():
        print(f"\n[criterion {number:>2}] {'PASS' if passed else 'FAIL'}: {detail}")


def sign_changes(x):
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@pytest.fixture(scope="module")
def regularized_trace():
    t0 = time.perf_counter()
    tr = run_closed_loop(double_integrator_config(ControllerSpec.ond_regularized(K_GAIN, MU),
                                                  horizon=2.0))
    return tr, time.perf_counter() - t0


def test_c01_axis_non_crossing_and_attractor(capsys, regularized_trace):
    tr, elapsed = regularized_trace
    x1, x2 = tr["x1_true"], tr["x2_true"]
    small = np.nonzero(np.hypot(x1, x2) < 1e-9)[0]
    end = small[0] if len(small) else len(x1)
    crossings = sign_changes(x1[:end])
    w = (np.abs(x1) >= 1e-6) & (np.abs(x1) <= 1e-3) & (x2 != 0)
    ratio = np.abs(tr["attractor_residual"][w]) / np.abs(x2[w])
    worst = float(np.max(ratio)) if w.any() else math.inf
    ok = crossings == 0 and worst < 0.05 and elapsed < 5.0
    report(capsys, 1, ok, f"sign changes {crossings} (need 0), max |residual|/|x2| {worst:.3g} "
                          f"(need < 0.05) over {int(w.sum())} samples, runtime {elapsed:.2f} s")
    assert ok


def test_c02_gain_sweep_monotonicity(capsys):
    t0 = time.perf_counter()
    times = []
    for k in (10.0, 100.0, 1000.0):
        tr = run_closed_loop(double_integrator_config(ControllerSpec.ond_regularized(k, MU),
                                                      horizon=3.0))
        below = np.nonzero(np.abs(tr["x1_true"]) < 1e-3)[0]
        times.append(float(tr["t"][below[0]]) if len(below) else math.inf)
    elapsed = time.perf_counter() - t0
    ok = times[0] > times[1] > times[2] and elapsed < 10.0
    report(capsys, 2, ok, f"time to |x1| < 1e-3 for k = 10, 100, 1000: "
                          f"{', '.join(f'{x:.4g}' for x in times)} s, runtime {elapsed:.2f} s")
    assert ok


def test_c03_hyper_exponential_convergence(capsys):
    rep = run_convergence_benchmark(k=K_GAIN, mu=MU, pd_tau=0.2, horizon=3.0)
    t = rep.ond["t"]
    w = (t >= 0.5) & (t <= 2.0)
    slope = float(np.polyfit(t[w], rep.log_pd[w], 1)[0])
    expected = -10.0 / math.log(10.0)
    rel = abs(slope / expected - 1)
    d2 = np.diff(rep.log_ond[w], 2)
    finite = np.isfinite(d2)
    d2_max = float(np.max(d2[finite]))
    concave = bool(finite.all() and np.all(d2 < 0))
    cross = rep.crossover_time
    ok = rel <= 0.03 and concave and cross is not None
    report(capsys, 3, ok, f"PD log slope {slope:.4f} vs {expected:.4f} ({100 * rel:.2f}%, need <= 3%); "
                          f"OND max second difference {d2_max:.3g} (need < 0); crossover {cross}")
    assert ok


def energy_step(x1, x2, k, a, b):
    # V(a) - V(b), factored to avoid cancellation
    return 0.5 * k * (x1[a] - x1[b]) * (x1[a] + x1[b]) + 0.5 * (x2[a] - x2[b]) * (x2[a] + x2[b])


def test_c04_lyapunov_consistency(capsys, regularized_trace):
    tr, _ = regularized_trace
    t, x1, x2 = tr["t"], tr["x1_true"], tr["x2_true"]
    i = np.arange(1, len(t) - 1)
    fd = energy_step(x1, x2, K_GAIN, i + 1, i - 1) / (t[i + 1] - t[i - 1])
    rate = -np.abs(x2[i]) ** 3 / (np.abs(x1[i]) + MU)
    m = np.abs(x2[i]) > 1e-6
    rel = np.abs(fd[m] - rate[m]) / np.abs(rate[m])
    bad = int(np.count_nonzero(rel > 0.05))
    j = np.arange(len(t) - 1)
    increase = float(np.max(energy_step(x1, x2, K_GAIN, j + 1, j)))
    ok = bad == 0 and increase <= 1e-9
    report(capsys, 4, ok, f"{bad}/{int(m.sum())} samples off by > 5% (max relative error "
                          f"{float(np.max(rel)):.3g}); max per-step V increase {increase:.3g} "
                          f"(need <= 1e-9)")
    assert ok


def symbolic_certificate():
    e1, e2, mu = sp.symbols("e1 e2 mu", real=True)
    expr = (-sp.Rational(3, 4) * sp.Abs(e2) * e2 ** 2 * (sp.Abs(e1) + 2 * mu)
            / (e1 + mu * sp.sign(e1)) ** 2)
    return sp.lambdify((e1, e2, mu), expr, "numpy")


def test_c05_convergence_quadratic_form(capsys):
    grid = np.linspace(-1.0, 1.0, 100)
    E1, E2 = np.meshgrid(grid, grid, indexing="ij")
    vals = np.array([[convergence_form(ErrorState(a, b), K_GAIN, MU) for b in grid] for a in grid])
    oracle = symbolic_certificate()(E1, E2, MU)
    dev = float(np.max(np.abs(vals - oracle) / np.maximum(1.0, np.abs(oracle))))
    on_axis = [convergence_form(ErrorState(a, 0.0), K_GAIN, MU) for a in grid]
    zero_set = bool(np.all(vals[E2 != 0] < 0)) and all(v == 0.0 for v in on_axis)
    ok = bool(np.all(vals <= 0)) and zero_set and dev <= 1e-12
    report(capsys, 5, ok, f"max value {float(vals.max()):.3g} (need <= 0); zero exactly on e2 = 0: "
                          f"{zero_set}; max relative deviation from symbolic {dev:.2g} (need <= 1e-12)")
    assert ok


def test_c06_disturbance_steady_state(capsys):
    results = {}
    for xi in (1.0, 0.0):
        try:
            results[xi] = (run_disturbance_steady_state(K_GAIN, xi, IDENTIFIED_MOTOR), True)
        except SettlingTimeout as exc:
            # the criterion is on the terminal value; the settle flag is reported alongside
            results[xi] = (exc.terminal_x1, False)
    x_one, settled_one = results[1.0]
    x_zero, settled_zero = results[0.0]
    rel = abs(x_one / 0.01 - 1)
    ok = rel <= 0.01 and abs(x_zero) < 1e-9
    report(capsys, 6, ok, f"xi = 1: terminal x1 {x_one:.6g} ({100 * rel:.3f}% from 0.01, need <= 1%, "
                          f"settled {settled_one}); xi = 0: terminal x1 {x_zero:.3g} "
                          f"(need |x1| < 1e-9, settled {settled_zero})")
    assert ok


def test_c07_pd_cancellation_oracle(capsys):
    p = IDENTIFIED_MOTOR
    cfg = SimConfig(plant=LagMotor(p), controller=ControllerSpec.pd_law(1000.0, p.tau),
                    initial=State2(0.0, 0.0), horizon=0.3,
                    reference=ReferenceSpec("step", amplitude=0.01))
    tr = run_closed_loop(cfg)
    oracle = 0.01 * (1 - np.exp(-46.3 * tr["t"]))
    dev = float(np.max(np.abs(tr["x1_true"] - oracle))) / 0.01
    wc = crossover_margin(NominalModel(p.K, p.tau), 1000.0, p.tau).omega_c
    wc_rel = abs(wc / 46.3 - 1)
    ok = dev < 0.02 and wc_rel <= 1e-6
    report(capsys, 7, ok, f"max step deviation {100 * dev:.2f}% of final value (need < 2%); "
                          f"omega_c {wc:.10g} rad/s ({wc_rel:.2g} relative, need <= 1e-6)")
    assert ok


def test_c08_identification_round_trip(capsys):
    t0 = time.perf_counter()
    p = IDENTIFIED_MOTOR
    pts = measure_fr(LagMotor(p), IdConfig(frequencies=tuple(np.logspace(0, 3, 20))))
    fit = fit_model(pts)
    clean = max(abs(fit.K / p.K - 1), abs(fit.tau / p.tau - 1))
    errs = monte_carlo_fit(pts, p.K, p.tau, 0.02, 100, base_seed=0)
    frac = float(np.mean(errs <= 0.03))
    elapsed = time.perf_counter() - t0
    ok = clean <= 0.01 and frac >= 0.95 and elapsed < 60.0
    report(capsys, 8, ok, f"noiseless worst error {clean:.2g} (need <= 1%); {100 * frac:.0f}% of 100 "
                          f"noisy seeds within 3% (need >= 95%); runtime {elapsed:.1f} s")
    assert ok


def test_c09_smd_quality(capsys):
    c = compare_estimators(amplitude=0.005, omega=10.0, dt=1e-4, duration=4.0,
                           noise_std=4e-6, seed=0, cutoff_hz=200.0)
    smd = c.rms(c.v_smd)
    h = lpf_frequency_response(10.0, 1e-4, 200.0)
    lpf_phase = c.peak * abs(h - 1) / math.sqrt(2)
    slope = run_scenario("experiments/slope-tracking", seed=0)
    ond_ss = slope.metrics["ond"]["steady_state_abs_e1"]
    pd_ss = slope.metrics["pd"]["steady_state_abs_e1"]
    parts = (smd < 0.05 * c.peak, smd < lpf_phase, ond_ss <= pd_ss)
    ok = all(parts)
    report(capsys, 9, ok, f"SMD RMS {smd:.3g} m/s = {100 * smd / c.peak:.2f}% of peak (need < 5%) "
                          f"after {c.t_conv:.3g} s; LPF phase-induced RMS {lpf_phase:.3g} "
                          f"(need SMD below it); slope steady-state |e1| OND {ond_ss:.3g} vs "
                          f"PD {pd_ss:.3g} (need OND <= PD)")
    assert ok


def test_c10_saturation_robustness(capsys):
    cfg = double_integrator_config(ControllerSpec.ond_regularized(K_GAIN, MU, S=50.0), horizon=2.0)
    tr = run_closed_loop(cfg)
    norm = np.hypot(tr["x1_true"], tr["x2_true"])
    peak_u = float(np.max(np.abs(tr["u_applied"])))
    reached = bool(np.any(norm < 1e-6))
    ok = reached and peak_u <= 50.0
    report(capsys, 10, ok, f"smallest state norm within the 2 s horizon {float(norm.min()):.3g} "
                           f"(need < 1e-6); max |u| applied {peak_u:.3g} (bound 50)")
    assert ok
