"""Unit tests for run config parsing, validation and the config echo."""

import json
import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from noncollide.config import DEFAULT_SEED
from noncollide.errors import ConfigError
from noncollide.run_config import (
    ECHO_PREFIX,
    config_from_echo,
    load_config,
    parse_config,
    resolve_x0,
)


CONFIGS_DIR = Path(__file__).parent.parent.parent / "configs"


class TestParseConfig:
    """Test validation of YAML run configs."""

    @pytest.mark.unit
    def test_minimal_dyson(self, dyson_yaml):
        cfg = parse_config(dyson_yaml)

        assert cfg.system.kind == "dyson"
        assert cfg.system.gamma == 1.0
        assert cfg.p == 3
        assert cfg.dt_base == pytest.approx(1e-3)
        assert cfg.seed == 11
        assert not cfg.seed_defaulted
        np.testing.assert_array_equal(cfg.initial_point(), np.zeros(3))

    @pytest.mark.unit
    def test_missing_seed_defaults(self, dyson_yaml):
        # Arrange
        text = "\n".join(line for line in dyson_yaml.splitlines() if not line.startswith("seed"))

        # Act
        cfg = parse_config(text)

        # Assert
        assert cfg.seed == DEFAULT_SEED
        assert cfg.seed_defaulted

    @pytest.mark.unit
    def test_params_mapping(self):
        cfg = parse_config("system: beta_wishart\nparams: {alpha: 3.0, beta: 1.0}\np: 2\nx0: [0.5, 1.0]\nT: 0.1\n")

        assert cfg.system.alpha == 3.0
        assert cfg.coefficient_set().domain == "half_line"

    @pytest.mark.unit
    def test_shipped_configs_parse(self):
        """Every example config under configs/ is valid."""
        paths = sorted(CONFIGS_DIR.glob("*.yaml"))
        assert paths

        for path in paths:
            cfg = load_config(path)
            assert cfg.coefficient_set().p == cfg.p

    @pytest.mark.unit
    def test_custom_system(self):
        # Arrange
        cfg = load_config(CONFIGS_DIR / "custom.yaml")

        # Act
        cs = cfg.coefficient_set()

        # Assert
        assert cfg.system.kind == "custom"
        assert cs.kernel_value(0, 1, 0.0, 1.0) == pytest.approx(1.0)
        assert cs.kernel_value(0, 2, 0.0, 1.0) == pytest.approx(0.5)

    @pytest.mark.unit
    def test_x0_outside_domain(self):
        # Arrange
        text = "system: jacobi\nq: 3.0\nr: 3.0\nbeta: 1.0\np: 2\nx0: [-0.1, 0.5]\nT: 0.1\n"

        # Act
        with pytest.raises(ConfigError) as excinfo:
            parse_config(text)

        # Assert
        assert any(error.startswith("x0:") for error in excinfo.value.errors)

    @pytest.mark.unit
    def test_every_error_is_listed(self, dyson_yaml):
        # Arrange
        text = dyson_yaml.replace("n_paths: 20", "n_paths: 0").replace("p: 3", "p: 0")

        # Act
        with pytest.raises(ConfigError) as excinfo:
            parse_config(text)

        # Assert
        locations = {error.split(":")[0] for error in excinfo.value.errors}
        assert {"n_paths", "p"} <= locations

    @pytest.mark.unit
    def test_unknown_key(self, dyson_yaml):
        # Arrange
        text = dyson_yaml.replace("system: dyson\ngamma: 1.0", "system: dyson\nparams: {gamma: 1.0}") + "colour: red\n"

        # Act
        with pytest.raises(ConfigError) as excinfo:
            parse_config(text)

        # Assert
        assert any(error.startswith("colour:") for error in excinfo.value.errors)

    @pytest.mark.unit
    def test_unknown_preset_parameter(self, dyson_yaml):
        with pytest.raises(ConfigError) as excinfo:
            parse_config(dyson_yaml + "colour: red\n")

        assert any("colour" in error for error in excinfo.value.errors)

    @pytest.mark.unit
    def test_T_must_be_whole_steps(self, dyson_yaml):
        with pytest.raises(ConfigError) as excinfo:
            parse_config(dyson_yaml.replace("T: 0.05", "T: 0.0505"))

        assert any(error.startswith("T:") for error in excinfo.value.errors)

    @pytest.mark.unit
    def test_not_a_mapping(self):
        with pytest.raises(ConfigError):
            parse_config("- just\n- a list\n")

    @pytest.mark.unit
    def test_with_seed(self, dyson_yaml):
        cfg = parse_config(dyson_yaml)

        assert cfg.with_seed(None) is cfg
        assert cfg.with_seed(5).seed == 5


class TestResolveX0:
    """Test the starting-point forms."""

    @pytest.mark.unit
    def test_forms(self):
        np.testing.assert_array_equal(resolve_x0("zero", 2), [0.0, 0.0])
        np.testing.assert_allclose(resolve_x0("equispaced(-1, 1)", 3), [-1.0, 0.0, 1.0])
        np.testing.assert_allclose(resolve_x0([0.0, 2.0], 2), [0.0, 2.0])

    @pytest.mark.unit
    @pytest.mark.parametrize("x0,p", [
        ([1.0, 0.0], 2),
        ([0.0, 1.0], 3),
        ("equispaced(1, 0)", 3),
        ("uniform", 2),
    ])
    def test_rejected(self, x0, p):
        with pytest.raises(ValueError):
            resolve_x0(x0, p)


class TestConfigEcho:
    """Test that echoed configs reproduce the run."""

    @pytest.mark.unit
    def test_echo_parses_back(self, dyson_yaml):
        # Arrange
        cfg = parse_config(dyson_yaml)

        # Act
        back = parse_config(config_from_echo("\n".join(cfg.echo_lines())))

        # Assert
        assert back.model_dump(exclude={"output", "workers"}) == cfg.model_dump(exclude={"output", "workers"})
        assert back.echo() == cfg.echo()

    @pytest.mark.unit
    def test_echo_skips_output_settings(self, dyson_yaml):
        # Arrange
        cfg = parse_config(dyson_yaml + "workers: 4\noutput: {path: out.csv}\n")

        # Act
        echo = cfg.echo()

        # Assert
        assert "workers" not in echo
        assert "out.csv" not in echo
        assert all(line.startswith(ECHO_PREFIX) for line in cfg.echo_lines())

    @pytest.mark.unit
    def test_load_from_json_echo(self, dyson_yaml, write_config):
        cfg = parse_config(dyson_yaml)
        path = write_config(json.dumps({"config_echo": cfg.echo(), "n_paths": 20}), name="result.json")

        assert load_config(path).echo() == cfg.echo()

    @pytest.mark.unit
    def test_no_echo(self, write_config):
        with pytest.raises(ConfigError):
            config_from_echo("t,x1\n0,0\n")
        with pytest.raises(ConfigError):
            load_config(write_config("{}", name="result.json"))

    @pytest.mark.unit
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")
