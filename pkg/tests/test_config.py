import numpy as np
import pytest

from proprio.config import ConfigError, ToolkitConfig, load_config, parse_config


def test_empty_config_is_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(path)
    assert cfg.kinematics.l1 == 0.209
    assert cfg.contactnet.batch_size == 30
    assert cfg.contactnet.learning_rate == 1e-4
    assert cfg.contactnet.epochs == 30


def test_missing_path_gives_defaults():
    cfg = load_config(None)
    assert isinstance(cfg, ToolkitConfig)


def test_overrides(tmp_path):
    path = tmp_path / "t.cfg"
    path.write_text(
        """
# comment line
[kinematics]
l1 = 0.25  # thigh
[contactnet]
batch_size = 12
preset = 1block
[gaitsim]
speed = 0.8
"""
    )
    cfg = parse_config(path)
    assert cfg.kinematics.l1 == 0.25
    assert cfg.contactnet.batch_size == 12
    assert cfg.contactnet.preset == "1block"
    assert cfg.gaitsim.speed == 0.8


def test_unknown_key_reports_location(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[kinematics]\nl9 = 3\n")
    with pytest.raises(ConfigError, match=r"bad\.cfg:2"):
        parse_config(path)


def test_unknown_section(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[magic]\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(path)


def test_key_outside_section(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("l1 = 3\n")
    with pytest.raises(ConfigError, match="outside"):
        parse_config(path)


def test_bad_value_type(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[kinematics]\nl1 = soft\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config(path)


def test_derived_objects(tmp_path):
    path = tmp_path / "t.cfg"
    path.write_text("[inekf]\ngyro_std = 0.5\n[baselines]\ngait_duty = 0.4\n")
    cfg = parse_config(path)
    noise = cfg.inekf.noise()
    np.testing.assert_allclose(noise.gyro_cov, np.eye(3) * 0.25)
    sched = cfg.baselines.schedule()
    assert sched.duty == 0.4
    assert len(cfg.kinematics.legs()) == 4
