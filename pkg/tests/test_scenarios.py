import math
import time

import numpy as np
import pytest

from ondamp.errors import ConfigurationError
from ondamp.scenarios import (
    SCENARIOS,
    compare_estimators,
    energy_landscape,
    export_energy_landscape,
    merge_params,
    run_scenario,
    tracking_metrics,
)
from ondamp.sim import SimTrace

CATALOG = {
    "figures/fig1-phase-portrait", "figures/fig2-gain-sweep", "figures/fig4-piecewise-tracking",
    "figures/fig5-convergence", "figures/fig6-energy-landscape", "experiments/sine-0.5hz",
    "experiments/sine-2hz", "experiments/slope-tracking", "experiments/step-disturbance",
    "sysid/fr-measure", "sysid/fit-selftest", "estimators/smd-vs-lpf", "custom",
}


def test_catalog_registered():
    assert set(SCENARIOS) == CATALOG


def test_energy_landscape_examples(tmp_path):
    table = export_energy_landscape(100.0, 1e-4, (-1, 1, 21), (-1, 1, 21), tmp_path / "grid.csv")
    assert (tmp_path / "grid.csv").read_text().startswith("e1,e2,abs_V_rate\n")
    e1, e2, z = table.rows.T
    assert np.all(z[e2 == 0.0] == 0.0)
    row = (e2 == 0.5) & (e1 >= 0)
    assert np.all(np.diff(z[row]) < 0)
    b = np.linspace(0.1, 1.0, 10)
    vals = energy_landscape(100.0, 1e-4, [0.3], b)[:, 0]
    assert np.polyfit(np.log(b), np.log(vals), 1)[0] == pytest.approx(3.0, abs=1e-6)
    with pytest.raises(ConfigurationError):
        export_energy_landscape(100.0, 1e-4, (-1, math.inf, 3), (-1, 1, 3))


def test_tracking_metrics_on_known_trace():
    t = np.linspace(0, 1, 101)
    x1 = 1.0 - np.exp(-10 * t) * np.cos(20 * t)
    cols = {"t": t, "x1_true": x1, "r": np.ones_like(t)}
    m = tracking_metrics(SimTrace(cols))
    assert m["terminal_abs_e1"] == pytest.approx(abs(x1[-1] - 1))
    assert m["peak_overshoot"] == pytest.approx(np.max(x1 - 1))
    assert m["max_abs_error"] == 1.0
    assert 0 < m["settling_time"] < 1


def test_merge_params():
    sc = SCENARIOS["figures/fig5-convergence"]
    assert merge_params(sc, {"k": 50})["k"] == 50.0
    with pytest.raises(ConfigurationError):
        merge_params(sc, {"kk": 1.0})
    with pytest.raises(ConfigurationError):
        merge_params(sc, {"window": 1.0})


def test_unknown_and_custom_without_section():
    with pytest.raises(ConfigurationError):
        run_scenario("figures/nope")
    with pytest.raises(ConfigurationError):
        run_scenario("custom")


def test_estimator_comparison_aligns_samples():
    c = compare_estimators(duration=1.0, noise_std=0.0)
    assert c.t_conv < 0.1
    assert c.rms(c.v_smd) < 0.01 * c.peak


@pytest.mark.parametrize("name", sorted(CATALOG - {"custom"}))
def test_scenario_runs_under_a_minute(name):
    t0 = time.perf_counter()
    res = run_scenario(name, seed=1)
    assert time.perf_counter() - t0 < 60.0
    assert res.metrics
    assert res.traces or res.tables
    for tr in res.traces.values():
        assert tr.status == "ok"
