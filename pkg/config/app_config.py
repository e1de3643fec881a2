"""
Runtime Configuration

Process-level settings loaded from environment variables (a `.env` file is
honoured). Run parameters live in TOML files, see config/run_config.py.
Unset variables stay None so they never override a run file.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from core.errors import ConfigurationError

load_dotenv()

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _int_env(name: str, minimum: int) -> Optional[int]:
    raw = os.getenv(name)
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"Invalid {name}: {raw}")
    if value < minimum:
        raise ConfigurationError(f"{name} must be at least {minimum}")
    return value


@dataclass
class RuntimeSettings:
    """Runtime settings shared by every subcommand."""

    log_level: str = "WARNING"
    log_json: bool = False
    threads: Optional[int] = None
    out_dir: Optional[Path] = None
    seed: Optional[int] = None

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """
        Load runtime settings from SPEEDLIMITS_* environment variables.

        Returns:
            RuntimeSettings instance

        Raises:
            ConfigurationError: If a variable is set to an unusable value

        Example:
            >>> settings = RuntimeSettings.from_env()
            >>> print(settings.log_level)
            WARNING
        """
        log_level = os.getenv("SPEEDLIMITS_LOG_LEVEL", "WARNING").upper()
        if log_level not in LOG_LEVELS:
            raise ConfigurationError(f"Invalid SPEEDLIMITS_LOG_LEVEL: {log_level}")

        log_json = os.getenv("SPEEDLIMITS_LOG_JSON", "false").lower() in ("1", "true", "yes")
        out_dir = os.getenv("SPEEDLIMITS_OUT_DIR")

        return cls(
            log_level=log_level,
            log_json=log_json,
            threads=_int_env("SPEEDLIMITS_THREADS", 1),
            out_dir=Path(out_dir) if out_dir else None,
            seed=_int_env("SPEEDLIMITS_SEED", 0),
        )
