#!/usr/bin/env python3
"""
Configuration Loading
=====================

Typed, documented defaults for every tunable of the simulator, agent and
evaluation, with layered overrides.

Features:
- Nested dataclass sections aggregated in AppConfig
- .env support through python-dotenv (AUTOHEAL_CONFIG, AUTOHEAL_SEED,
  AUTOHEAL_LOG_LEVEL)
- JSON override document; unknown keys are rejected
- Precedence: command line > JSON file > environment > defaults
- Stable SHA-256 configuration hash for weight files and run tracking

Usage:
    from helpers.config import load_config

    config = load_config(overrides={'dqn': {'episodes': 100}})
    print(config.config_hash())
"""

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

# Try to import python-dotenv for .env file support
try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False

from agent.dqn import DQNConfig
from netsim.actuation import ActuationSettings
from netsim.knowledge import QoSIntents
from netsim.simulator import SimulationSettings

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for unreadable config files, unknown keys or invalid values."""


@dataclass(frozen=True)
class TopologySettings:
    preset: str = "wpp"
    roster: Optional[str] = None


@dataclass(frozen=True)
class IntentSettings:
    u_thr: float = 0.8
    l_thr_ms: float = 3.0
    temp_min_c: float = 18.0
    temp_max_c: float = 55.0
    intents_file: Optional[str] = None

    def to_intents(self) -> QoSIntents:
        if self.intents_file:
            return QoSIntents.from_file(self.intents_file)
        return QoSIntents(u_thr=self.u_thr, l_thr=self.l_thr_ms / 1000.0,
                          tau_thr_min=self.temp_min_c, tau_thr_max=self.temp_max_c)


@dataclass(frozen=True)
class EvaluationSettings:
    duration: float = 600.0
    training_duration: float = 30.0
    seeds: Tuple[int, ...] = (23, 37, 49, 71, 42)
    detection_delay: float = 2.0
    max_workers: int = 1
    train_mix: Tuple[str, ...] = ("TC5", "TC6", "TC7", "TC8", "TC9")
    tracker_db: str = "selfheal_runs.db"


@dataclass(frozen=True)
class AppConfig:
    topology: TopologySettings = field(default_factory=TopologySettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    actuation: ActuationSettings = field(default_factory=ActuationSettings)
    intents: IntentSettings = field(default_factory=IntentSettings)
    dqn: DQNConfig = field(default_factory=DQNConfig)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)

    def __post_init__(self):
        if self.simulation.k_paths != self.dqn.k_paths:
            raise ConfigError(f"simulation.k_paths ({self.simulation.k_paths}) and dqn.k_paths "
                              f"({self.dqn.k_paths}) must match")

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {f.name: _jsonable(dataclasses.asdict(getattr(self, f.name)))
                for f in dataclasses.fields(self)}

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def with_overrides(self, overrides: Mapping[str, Mapping[str, Any]]) -> 'AppConfig':
        """
        Apply a {section: {key: value}} document.

        Raises:
            ConfigError: On unknown sections or keys, or values the section rejects
        """
        sections = {f.name for f in dataclasses.fields(self)}
        changes = {}
        for section, values in overrides.items():
            if section not in sections:
                raise ConfigError(f"Unknown config section: {section}")
            if not isinstance(values, Mapping):
                raise ConfigError(f"Config section '{section}' must be an object")
            changes[section] = _override(getattr(self, section), values, section)
        merged = {f.name: changes.get(f.name, getattr(self, f.name)) for f in dataclasses.fields(self)}
        # keep the path-slot count consistent when only one side was overridden
        if 'k_paths' in overrides.get('simulation', {}) and 'k_paths' not in overrides.get('dqn', {}):
            merged['dqn'] = dataclasses.replace(merged['dqn'], k_paths=merged['simulation'].k_paths)
        elif 'k_paths' in overrides.get('dqn', {}) and 'k_paths' not in overrides.get('simulation', {}):
            merged['simulation'] = dataclasses.replace(merged['simulation'], k_paths=merged['dqn'].k_paths)
        return AppConfig(**merged)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _override(section_obj: Any, values: Mapping[str, Any], section: str) -> Any:
    known = {f.name for f in dataclasses.fields(section_obj)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"Unknown key(s) in section '{section}': {', '.join(sorted(unknown))}")
    coerced = {}
    for key, value in values.items():
        current = getattr(section_obj, key)
        coerced[key] = tuple(value) if isinstance(current, tuple) and isinstance(value, list) else value
    try:
        return dataclasses.replace(section_obj, **coerced)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value in section '{section}': {e}") from e


def load_env_config() -> Dict[str, str]:
    """
    Read AUTOHEAL_* settings from the environment, loading .env first if present.

    Returns:
        Dictionary with any of 'config_path', 'seed', 'log_level'
    """
    env_file = Path('.env')
    if DOTENV_AVAILABLE and env_file.exists():
        load_dotenv(env_file)

    config = {}
    env_mappings = {
        'config_path': 'AUTOHEAL_CONFIG',
        'seed': 'AUTOHEAL_SEED',
        'log_level': 'AUTOHEAL_LOG_LEVEL',
    }
    for config_key, env_key in env_mappings.items():
        value = os.getenv(env_key)
        if value:
            config[config_key] = value
    return config


def load_config(config_path: Optional[str] = None,
                overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
                env: Optional[Mapping[str, str]] = None) -> AppConfig:
    """
    Build the effective configuration.

    Args:
        config_path: JSON override file (takes precedence over AUTOHEAL_CONFIG)
        overrides: Command-line overrides as {section: {key: value}}
        env: Environment settings (default: load_env_config())

    Returns:
        AppConfig

    Raises:
        ConfigError: For a missing/invalid file or unknown keys
    """
    env = load_env_config() if env is None else env
    config = AppConfig()

    if env.get('seed'):
        try:
            config = config.with_overrides({'dqn': {'seed': int(env['seed'])}})
        except ValueError:
            logger.warning(f"Invalid AUTOHEAL_SEED value: {env['seed']}")

    path = config_path or env.get('config_path')
    if path:
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"Config file not found: {file_path}")
        try:
            document = json.loads(file_path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {file_path} is not valid JSON: {e}") from e
        if not isinstance(document, Mapping):
            raise ConfigError(f"Config file {file_path} must contain a JSON object")
        config = config.with_overrides(document)
        logger.info(f"Loaded configuration overrides from {file_path}")

    if overrides:
        config = config.with_overrides(overrides)
    return config
