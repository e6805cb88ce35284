import json
import logging
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Union

from dotenv import load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

# Load environment variables from .env file (with error handling)
try:
    load_dotenv()
except Exception as e:
    logger.warning("Could not load .env file: %s", e)


@dataclass(frozen=True)
class Settings:
    max_qubits: int = 10
    enum_cap: int = 10_000_000
    dense_cap: int = 8192
    freq_tol: float = 1e-9
    hermitian_tol: float = 1e-10
    log_level: str = "INFO"


def _env(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError as e:
        raise ConfigError(f"environment variable {name}={raw!r} is not a valid {cast.__name__}") from e


@lru_cache(maxsize=None)
def get_settings() -> Settings:
    """Settings from VQCFOURIER_* environment variables"""
    return Settings(
        max_qubits=_env("VQCFOURIER_MAX_QUBITS", int, Settings.max_qubits),
        enum_cap=_env("VQCFOURIER_ENUM_CAP", int, Settings.enum_cap),
        dense_cap=_env("VQCFOURIER_DENSE_CAP", int, Settings.dense_cap),
        freq_tol=_env("VQCFOURIER_FREQ_TOL", float, Settings.freq_tol),
        hermitian_tol=_env("VQCFOURIER_HERMITIAN_TOL", float, Settings.hermitian_tol),
        log_level=_env("VQCFOURIER_LOG_LEVEL", str, Settings.log_level).upper(),
    )


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a structured (JSON) config file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            config = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid config {path}: line {e.lineno}: {e.msg}") from e
    if not isinstance(config, dict):
        raise ConfigError(f"config {path} must hold a JSON object at top level")
    return config


def require(config: Dict[str, Any], key: str, where: str = "config") -> Any:
    if key not in config:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return config[key]
