"""Settings loading, environment and command-line overrides."""

import logging
from dataclasses import dataclass
from typing import Tuple

import pytest

from trigopt.errors import ConfigError
from trigopt.settings import (
    apply_overrides,
    coerce_scalars,
    configure_logging,
    load_settings,
    load_yaml,
    parse_assignment,
)


class TestLoadSettings:
    def test_defaults(self, settings):
        assert set(settings) >= {"nlp", "bnb", "homotopy", "logging", "output"}
        assert settings["homotopy"]["tau0"] == pytest.approx(100.0)

    def test_environment_overrides(self, clean_env, tmp_path):
        clean_env.setenv("TRIGOPT_BNB_WORKERS", "3")
        clean_env.setenv("TRIGOPT_LOG_LEVEL", "DEBUG")
        config = load_settings(env_path=tmp_path / "missing.env")
        assert config["bnb"]["workers"] == 3
        assert config["logging"]["level"] == "DEBUG"

    def test_dotenv_file(self, clean_env, tmp_path):
        env_file = tmp_path / ".env"
        env_file.write_text("TRIGOPT_OUTPUT_DIR=/tmp/trigopt-runs\n")
        config = load_settings(env_path=env_file)
        assert config["output"]["directory"] == "/tmp/trigopt-runs"

    def test_bad_integer(self, clean_env, tmp_path):
        clean_env.setenv("TRIGOPT_NLP_MAX_ITER", "many")
        with pytest.raises(ConfigError):
            load_settings(env_path=tmp_path / "missing.env")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_yaml(tmp_path / "absent.yaml")

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError):
            load_yaml(path)
        path.write_text("")
        assert load_yaml(path) == {}


class TestOverrides:
    @pytest.mark.parametrize(
        "item, expected",
        [
            ("nlp.tol=1e-8", ("nlp.tol", 1e-8)),
            ("bnb.workers=2", ("bnb.workers", 2)),
            ("trace=true", ("trace", True)),
            ("name=ugv", ("name", "ugv")),
            ("x0=[0, 1]", ("x0", [0, 1])),
            ("limit=", ("limit", None)),
        ],
    )
    def test_parse_assignment(self, item, expected):
        assert parse_assignment(item) == expected

    @pytest.mark.parametrize("item", ["tol", "=3", "x=[1, 2"])
    def test_malformed(self, item):
        with pytest.raises(ConfigError):
            parse_assignment(item)

    def test_apply_leaves_original(self, settings):
        updated = apply_overrides(settings, ["nlp.max_iter=7", "extra.section.value=1"])
        assert updated["nlp"]["max_iter"] == 7
        assert updated["extra"]["section"]["value"] == 1
        assert settings["nlp"]["max_iter"] != 7
        assert "extra" not in settings

    def test_cannot_descend_into_scalar(self):
        with pytest.raises(ConfigError):
            apply_overrides({"nlp": {"tol": 1e-8}}, ["nlp.tol.abs=1"])


@dataclass
class Sample:
    weight: float = 1.0
    count: int = 1
    enabled: bool = False
    mode: str = "sum"
    box: Tuple[float, float] = (0.0, 1.0)


class TestCoerceScalars:
    def test_yaml_strings_become_numbers(self, tmp_path):
        path = tmp_path / "params.yaml"
        path.write_text("weight: 1.0e3\ncount: 4\n")
        loaded = load_yaml(path)
        assert loaded["weight"] == "1.0e3"
        data = coerce_scalars(Sample, loaded, "Sample")
        assert data == {"weight": 1000.0, "count": 4}

    def test_mixed_values(self):
        data = coerce_scalars(Sample, {"weight": 3, "count": "12", "enabled": "yes", "box": ["a"]}, "Sample")
        assert data["weight"] == 3.0 and isinstance(data["weight"], float)
        assert data["count"] == 12
        assert data["enabled"] is True
        assert data["box"] == ["a"]

    @pytest.mark.parametrize("data", [{"weight": "heavy"}, {"count": [1]}, {"enabled": "perhaps"}, {"weight": False}])
    def test_rejects(self, data):
        with pytest.raises(ConfigError, match="Sample parameter"):
            coerce_scalars(Sample, data, "Sample")


class TestLogging:
    def test_level(self, root_logger):
        configure_logging({"logging": {"level": "warning"}})
        assert root_logger.level == logging.WARNING
        assert len(root_logger.handlers) == 1

    def test_unknown_level(self):
        with pytest.raises(ConfigError):
            configure_logging({"logging": {"level": "chatty"}})
