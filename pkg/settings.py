import logging
import os
from typing import Dict, List, Optional, Tuple

from dotenv import load_dotenv

from attack_sim import AttackSpec
from watermark_core import ComparisonMode

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")

ENV_KEYS = {
    "registry_path": "ZWM_REGISTRY_PATH",
    "archive_dir": "ZWM_ARCHIVE_DIR",
    "comparison_mode": "ZWM_COMPARISON_MODE",
    "min_count": "ZWM_MIN_COUNT",
    "host": "ZWM_HOST",
    "port": "ZWM_PORT",
    "log_level": "ZWM_LOG_LEVEL",
}
INT_SETTINGS = ("min_count", "port")


class WatermarkSettingsManager:
    """Defaults, .env/environment overrides and attack presets"""

    def __init__(self, env_file: Optional[str] = None, environ: Optional[Dict[str, str]] = None):
        if environ is None:
            load_dotenv(env_file)
            environ = dict(os.environ)
        self.environ = environ
        self.default_settings = self.load_default_settings()
        self.presets = self.load_attack_presets()

    def load_default_settings(self) -> Dict:
        """Built-in defaults before environment and flags"""
        return {
            "registry_path": "registry.jsonl",
            "archive_dir": "",
            "comparison_mode": ComparisonMode.POSITIONAL_SYMBOL.value,
            "min_count": 1,
            "host": "127.0.0.1",
            "port": 8080,
            "log_level": "WARNING",
        }

    def load_attack_presets(self) -> Dict:
        """Named attack volumes, as fractions of the original word count"""
        return {
            "none": {"insert_ratio": 0.0, "delete_ratio": 0.0, "reorder_ratio": 0.0},
            "light": {"insert_ratio": 0.09, "delete_ratio": 0.06, "reorder_ratio": 0.0},
            "moderate": {"insert_ratio": 0.26, "delete_ratio": 0.25, "reorder_ratio": 0.0},
            "heavy": {"insert_ratio": 0.57, "delete_ratio": 0.53, "reorder_ratio": 0.0},
            "reorder": {"insert_ratio": 0.0, "delete_ratio": 0.0, "reorder_ratio": 0.10},
        }

    def apply_preset(self, preset_name: str, seed: int = 0) -> AttackSpec:
        if preset_name not in self.presets:
            raise KeyError(f"Unknown attack preset '{preset_name}'")
        return AttackSpec(seed=seed, **self.presets[preset_name])

    def resolve(self, overrides: Optional[Dict] = None) -> Dict:
        """Defaults, then environment, then explicit non-None overrides"""
        settings = self.default_settings.copy()
        for name, env_key in ENV_KEYS.items():
            if env_key in self.environ:
                settings[name] = self.environ[env_key]
        for name, value in (overrides or {}).items():
            if value is not None:
                settings[name] = value
        for name in INT_SETTINGS:
            try:
                settings[name] = int(settings[name])
            except (TypeError, ValueError):
                pass
        return settings

    def validate_settings(self, settings: Dict) -> Tuple[bool, List[str]]:
        """Validate settings and return errors if any"""
        errors = []

        if not str(settings.get("registry_path", "")).strip():
            errors.append("Registry path is required")

        if settings.get("comparison_mode") not in [mode.value for mode in ComparisonMode]:
            errors.append(f"Unknown comparison mode '{settings.get('comparison_mode')}'")

        min_count = settings.get("min_count")
        if not isinstance(min_count, int) or min_count < 1:
            errors.append("Minimum keyword count must be a positive integer")

        port = settings.get("port")
        if not isinstance(port, int) or not 0 <= port <= 65535:
            errors.append("Port must be an integer between 0 and 65535")

        if str(settings.get("log_level", "")).upper() not in LOG_LEVELS:
            errors.append(f"Unknown log level '{settings.get('log_level')}'")

        return len(errors) == 0, errors


def configure_logging(level: str = "WARNING"):
    """Send log records to stderr; stdout is reserved for command output"""
    logging.basicConfig(level=str(level).upper(), format=LOG_FORMAT, force=True)
