import json

import numpy as np
import pytest

from romwalk.pipeline import (
    ConfigError,
    PipelineConfig,
    config_from_dict,
    load_config,
    resolve_stages,
    run,
)


@pytest.mark.parametrize("doc, field", [
    ({"gait": {"z_lo": 0.9, "z_hi": 0.8}}, "gait.z_lo"),
    ({"gait": {"speed": 0.4, "step_length": 0.2}}, "gait.step_length"),
    ({"gait": {"colour": 1}}, "gait.colour"),
    ({"lateral": {"w": -0.1}}, "lateral.w"),
    ({"lateral": {"method": "rk4"}}, "lateral.method"),
    ({"transition": {"stance": "L"}}, "transition.stance"),
    ({"embedding": {"steps": 0}}, "embedding.steps"),
    ({"rom": {"m": 50.0}}, "rom.m"),
    ({"pipeline": {"stages": ["fly"]}}, "pipeline.stages"),
    ({"weather": {}}, "weather"),
])
def test_invalid_config_names_the_field(doc, field, tmp_path):
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert err.value.field == field
    assert not any(tmp_path.iterdir())


def test_left_first_step_is_allowed_without_sway():
    cfg = config_from_dict({"transition": {"stance": "L"}, "lateral": {"w": 0.0}})
    assert cfg.transition.stance == "L"


def test_defaults_and_digest():
    a, b = config_from_dict({}), config_from_dict({})
    assert isinstance(a, PipelineConfig)
    assert a.orbit_height == pytest.approx(0.81)
    assert a.controller.mu == a.rom.mu
    assert a.digest() == b.digest()
    assert config_from_dict({"gait": {"speed": 0.35}}).digest() != a.digest()
    c = config_from_dict({"controller": {"u_max": 250.0}})
    assert c.controller.u_ub[0] == 250.0 and c.controller.u_lb[0] == -250.0


def test_model_files_are_resolved_next_to_the_config(tmp_path):
    (tmp_path / "models").mkdir()
    (tmp_path / "models" / "rom.toml").write_text("[rom]\nmu = 0.8\n")
    (tmp_path / "walk.toml").write_text('[pipeline]\nrom_file = "models/rom.toml"\nseed = 7\n')
    cfg = load_config(tmp_path / "walk.toml")
    assert cfg.rom.mu == 0.8 and cfg.seed == 7
    (tmp_path / "bad.toml").write_text('[pipeline]\nbiped_file = "nope.toml"\n')
    with pytest.raises(ConfigError) as err:
        load_config(tmp_path / "bad.toml")
    assert err.value.field == "pipeline.biped_file"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_stage_dependencies():
    assert resolve_stages(["orbit"]) == ["orbit"]
    assert resolve_stages(["compose"]) == ["gait", "orbit", "transition", "compose"]
    assert resolve_stages(["simulate", "gait"])[-1] == "simulate"
    with pytest.raises(ConfigError):
        resolve_stages(["nap"])


def test_orbit_only_run_without_sway(tmp_path):
    man = run(config_from_dict({"lateral": {"w": 0.0}}), tmp_path, ["orbit"])
    assert man.status == "ok" and list(man.stages) == ["orbit"]
    for name in man.files:
        assert (tmp_path / name).is_file()
    rows = (tmp_path / "orbit.csv").read_text().splitlines()
    y = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.all(y == 0.0)
    assert json.loads((tmp_path / "manifest.json").read_text())["stages"]["orbit"]["status"] == "ok"


def test_failed_stage_skips_dependents(tmp_path):
    cfg = config_from_dict({"gait": {"z_lo": 1.5, "z_hi": 1.6}})
    man = run(cfg, tmp_path, ["transition"])
    assert man.status == "failed"
    assert man.stages["gait"]["status"] == "failed"
    assert man.stages["transition"]["status"] == "skipped"
    saved = json.loads((tmp_path / "manifest.json").read_text())
    assert saved["stages"]["gait"]["reason"] == "height"
