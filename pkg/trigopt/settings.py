"""
Settings - Configuration loading for trigopt

Configuration is layered:
- config/config.yaml holds the committed, non-sensitive defaults
- a .env file at the repository root (optional) exports TRIGOPT_* overrides
- command-line ``--override key=value`` pairs are applied last

The result is a plain nested dictionary; components receive the section
they need (``config["nlp"]``, ``config["homotopy"]``, ...).
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, get_type_hints

import yaml
from dotenv import load_dotenv

from trigopt.errors import ConfigError

REPO_ROOT = Path(__file__).parent.parent
DEFAULT_CONFIG_PATH = REPO_ROOT / "config" / "config.yaml"
DEFAULT_ENV_PATH = REPO_ROOT / ".env"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Environment variable -> (section, key, converter)
ENV_OVERRIDES = {
    "TRIGOPT_LOG_LEVEL": ("logging", "level", str),
    "TRIGOPT_OUTPUT_DIR": ("output", "directory", str),
    "TRIGOPT_BNB_WORKERS": ("bnb", "workers", int),
    "TRIGOPT_NLP_MAX_ITER": ("nlp", "max_iter", int),
}


def load_yaml(path: Path) -> Dict[str, Any]:
    """
    Read a YAML mapping from disk.

    Args:
        path: File to read

    Returns:
        Parsed mapping (empty dict for an empty file)

    Raises:
        ConfigError: If the file is missing or does not hold a mapping
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    with open(path, "r") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(f"Invalid YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Expected a mapping at the top of {path}")
    return data


def coerce_scalars(cls: type, data: Dict[str, Any], label: str) -> Dict[str, Any]:
    """
    Convert scalar parameter values to the types declared on a dataclass.

    YAML 1.1 only reads an exponent with a sign as a float (``1.0e+3``), so
    ``1.0e3`` arrives as a string. Fields typed float, int, bool or str are
    converted; other fields are left untouched.

    Args:
        cls: Parameter dataclass
        data: Raw parameter mapping
        label: Scenario name used in error messages

    Returns:
        New mapping with converted values

    Raises:
        ConfigError: If a value cannot be converted
    """
    hints = get_type_hints(cls)
    result = dict(data)
    for key, value in data.items():
        kind = hints.get(key)
        if kind not in (float, int, bool, str) or isinstance(value, kind):
            continue
        if kind is bool:
            text = str(value).strip().lower()
            if text not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{label} parameter {key} must be true or false, got {value!r}")
            result[key] = text in ("true", "1", "yes")
            continue
        if kind is not str and isinstance(value, bool):
            raise ConfigError(f"{label} parameter {key} must be a number, got {value!r}")
        try:
            result[key] = kind(float(value)) if kind is int and isinstance(value, str) else kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{label} parameter {key} must be of type {kind.__name__}, got {value!r}") from exc
    return result


def load_settings(
    path: Optional[Path] = None, env_path: Optional[Path] = None
) -> Dict[str, Any]:
    """
    Load solver defaults from config.yaml and apply environment overrides.

    Args:
        path: config.yaml location (defaults to config/config.yaml)
        env_path: .env location (defaults to the repository root)

    Returns:
        Nested configuration dictionary
    """
    env_file = Path(env_path) if env_path else DEFAULT_ENV_PATH
    if env_file.exists():
        load_dotenv(env_file)

    config = load_yaml(Path(path) if path else DEFAULT_CONFIG_PATH)

    for variable, (section, key, convert) in ENV_OVERRIDES.items():
        raw = os.environ.get(variable)
        if raw is None or raw == "":
            continue
        try:
            value = convert(raw)
        except ValueError as exc:
            raise ConfigError(f"{variable}={raw!r} is not a valid {convert.__name__}") from exc
        config.setdefault(section, {})[key] = value

    return config


def parse_assignment(item: str) -> Tuple[str, Any]:
    """
    Split ``key=value`` and parse the value as YAML.

    YAML 1.1 reads ``1e-8`` as a string, so strings that parse as floats
    are converted.

    Raises:
        ConfigError: If the item is not of the form key=value
    """
    if "=" not in item:
        raise ConfigError(f"Override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"Override {item!r} has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"Override {item!r} has an unparsable value") from exc
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    return key, value


def apply_overrides(config: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Apply ``dotted.key=value`` overrides to a copy of a configuration.

    Values are parsed as YAML scalars, so ``nlp.tol=1e-8`` yields a float
    and ``bnb.workers=2`` an int.

    Args:
        config: Configuration dictionary (left untouched)
        overrides: Override strings

    Returns:
        New configuration dictionary with overrides applied

    Raises:
        ConfigError: If an override is not of the form key=value
    """
    result = copy.deepcopy(config)
    for item in overrides:
        key, value = parse_assignment(item)
        node = result
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Override {key!r} descends into non-mapping {part!r}")
            node = child
        node[parts[-1]] = value
    return result


def configure_logging(config: Dict[str, Any]) -> None:
    """
    Install a single stream handler on the root logger.

    Args:
        config: Full configuration; reads ``logging.level``
    """
    level_name = str(config.get("logging", {}).get("level", "INFO")).upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        raise ConfigError(f"Unknown logging level: {level_name}")

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
