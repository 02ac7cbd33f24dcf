"""Configuration loader with environment variable substitution and named profiles"""
import copy
import os
import re
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from loguru import logger

from .exceptions import ConfigurationError


class ConfigLoader:
    """Load and parse YAML experiment files with environment variable and profile support"""

    def __init__(self):
        self.env_pattern = re.compile(r'\$\{([^}]+)\}')

    def load(self, config_path: str, profile: Optional[str] = None) -> Dict[str, Any]:
        """
        Load configuration from a YAML file

        Args:
            config_path: Path to the YAML file
            profile: Name of an entry under ``profiles:`` to deep-merge over the base document
        """
        config_file = Path(config_path)

        if not config_file.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            logger.error(f"Error parsing YAML configuration file {config_path}: {e}")
            raise ConfigurationError(f"Invalid YAML in configuration file: {e}") from e

        if config is None:
            logger.warning(f"Configuration file {config_path} is empty")
            config = {}
        if not isinstance(config, dict):
            raise ConfigurationError(f"Top level of {config_path} must be a mapping")

        config = self._substitute_env_vars(config)
        config = self.apply_profile(config, profile)

        logger.info(f"Configuration loaded from: {config_path}" + (f" (profile {profile})" if profile else ""))
        return config

    def apply_profile(self, config: Dict[str, Any], profile: Optional[str]) -> Dict[str, Any]:
        """Merge ``profiles[profile]`` over the base document and drop the profiles section"""
        profiles = config.pop("profiles", {}) or {}
        if profile is None:
            return config
        if profile not in profiles:
            raise ConfigurationError(
                f"Unknown profile '{profile}'; available: {sorted(profiles) or 'none'}"
            )
        return deep_merge(config, profiles[profile] or {})

    def _substitute_env_vars(self, obj: Any) -> Any:
        """Recursively substitute environment variables in config"""
        if isinstance(obj, dict):
            return {key: self._substitute_env_vars(value) for key, value in obj.items()}
        elif isinstance(obj, list):
            return [self._substitute_env_vars(item) for item in obj]
        elif isinstance(obj, str):
            # Replace ${VAR_NAME} or ${VAR_NAME:default}
            def replace_env(match):
                var_name = match.group(1)
                default_value = None

                if ':' in var_name:
                    var_name, default_value = var_name.split(':', 1)

                # Validate variable name to prevent injection
                if not var_name or not var_name.replace('_', '').isalnum():
                    logger.warning(f"Invalid environment variable name: {var_name}")
                    return match.group(0)

                env_value = os.getenv(var_name, default_value)
                if env_value is None:
                    logger.warning(f"Environment variable {var_name} not set and no default provided")
                    return match.group(0)
                return env_value

            substituted = self.env_pattern.sub(replace_env, obj)
            # A value that was entirely a placeholder is re-parsed so numbers stay numbers
            if substituted != obj and self.env_pattern.fullmatch(obj):
                return yaml.safe_load(substituted)
            return substituted
        else:
            return obj


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Return a copy of base with override merged in; nested mappings merge, everything else replaces"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged
