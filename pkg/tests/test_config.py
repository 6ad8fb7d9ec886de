from pathlib import Path

import pytest

from ondamp.config import load_config, parse_config
from ondamp.controllers import ControllerSpec
from ondamp.errors import ConfigurationError
from ondamp.plants import DoubleIntegrator, LagMotor, VoiceCoil

EXAMPLE = Path(__file__).resolve().parents[1] / "configs" / "example.toml"


def test_example_config_parses():
    cfg = load_config(EXAMPLE)
    assert cfg.seed == 7
    assert "custom" in cfg.scenarios
    assert isinstance(cfg.sim.plant, VoiceCoil)
    assert cfg.sim.controller.kind == "ond-scaled"
    assert cfg.sim.estimator.kind == "smd"
    assert cfg.sim.noise.seed == 7
    assert len(cfg.sysid.frequencies) == 20
    assert cfg.overrides["sysid/fit-selftest"] == {"seeds": 50}
    sc = cfg.scenario("sysid/fit-selftest")
    assert sc.params == {"seeds": 50} and sc.seed == 7


def test_defaults():
    cfg = parse_config("")
    assert cfg.seed == 0 and cfg.sim is None and cfg.sysid is None
    cfg = parse_config("[custom]\n")
    assert isinstance(cfg.sim.plant, DoubleIntegrator)
    assert cfg.sim.controller == ControllerSpec.ond_regularized(100.0, 1e-4)


def test_custom_plant_and_controllers():
    cfg = parse_config('[custom.plant]\nkind = "lag-motor"\nK = 0.1\n'
                       '[custom.controller]\nkind = "pd"\ngamma = 500\n')
    assert cfg.sim.plant == LagMotor(cfg.sim.plant.params)
    assert cfg.sim.plant.params.K == 0.1
    assert cfg.sim.controller.pd.gamma == 500.0
    cfg = parse_config('[custom.plant]\nkind = "voice-coil"\npreset = "ideal"\ncoulomb = 0.3\n'
                       'voltage_range = [0, 12]\n')
    assert cfg.sim.plant.params.coulomb == 0.3
    assert cfg.sim.plant.params.ripple_amplitude == 0.0
    assert cfg.sim.plant.params.voltage_range == (0.0, 12.0)


def test_frequency_list_and_range():
    assert parse_config("[sysid]\nfrequencies = [1, 10, 100, 1000]\n").sysid.frequencies == (1, 10, 100, 1000)
    cfg = parse_config("[sysid]\nfrequencies = { min = 1.0, max = 100.0, count = 3 }\n")
    assert cfg.sysid.frequencies == pytest.approx((1.0, 10.0, 100.0))


@pytest.mark.parametrize("text,needle", [
    ("seed = \n", "line 1"),
    ('seed = "x"\n', "seed (line 1): expected an integer"),
    ('\n[custom]\nhorizon = "x"\n', "custom.horizon (line 3)"),
    ('[custom.controller]\nkind = "lqr"\n', "custom.controller.kind (line 2)"),
    ('[custom.plant]\nkind = "voice-coil"\nfoo = 1\n', "custom.plant.foo (line 3): unknown field"),
    ("[custom]\ndt_control = 1.5e-5\n", "custom (line 1): dt_control"),
    ('[scenario."figures/fig5-convergence"]\nkk = 1\n', "has no parameter 'kk'"),
    ('[scenario."figures/fig5-convergence"]\nk = "big"\n', "expected float"),
    ('[scenario."nope"]\nk = 1\n', "unknown scenario"),
    ("[custom.reference]\nkind = \"piecewise-linear\"\nbreakpoints = [[0, 1], [0, 2]]\n",
     "strictly increasing"),
    ("[sysid]\nfrequencies = { min = 10.0, max = 1.0, count = 3 }\n", "sysid.frequencies"),
    ("bogus = 1\n", "bogus (line 1): unknown field"),
])
def test_errors_name_field_and_line(text, needle):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text, "cfg.toml")
    assert needle in str(exc.value)
    assert str(exc.value).startswith("cfg.toml")


def test_integer_override_accepted_for_float_parameter():
    cfg = parse_config('[scenario."figures/fig5-convergence"]\nk = 50\n')
    assert cfg.overrides["figures/fig5-convergence"] == {"k": 50}


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/config.toml")
