from __future__ import annotations

"""
Wrapper ligero sobre variables de entorno (y `.env`) para centralizar claves y valores por defecto.
"""

import os
from typing import Any, Optional

from dotenv import load_dotenv

from .resources import DEFAULT_LOGS_DIR, DEFAULT_OUTPUT_DIR, ENV_FILE


class AppSettings:
    """
    Pequeño helper para acceder a la configuración de entorno con claves centralizadas.
    """

    APPLICATION = "EstratoDoE"

    KEY_JOBS = "ESTRATO_JOBS"
    KEY_LOG_LEVEL = "ESTRATO_LOG_LEVEL"
    KEY_JSON_LOG = "ESTRATO_JSON_LOG"
    KEY_LOG_DIR = "ESTRATO_LOG_DIR"
    KEY_OUTPUT_DIR = "ESTRATO_OUTPUT_DIR"

    _DEFAULTS = {
        KEY_JOBS: "-1",
        KEY_LOG_LEVEL: "INFO",
        KEY_JSON_LOG: "0",
        KEY_LOG_DIR: DEFAULT_LOGS_DIR,
        KEY_OUTPUT_DIR: DEFAULT_OUTPUT_DIR,
    }

    _dotenv_loaded = False

    def __init__(self, env_file: Optional[str] = None) -> None:
        if not AppSettings._dotenv_loaded or env_file:
            # override=False: el entorno real manda sobre el archivo
            load_dotenv(env_file or ENV_FILE, override=False)
            AppSettings._dotenv_loaded = True

    def value(self, key: str, default: Optional[Any] = None) -> Any:
        raw = os.environ.get(key)
        if raw is None or raw == "":
            return self._DEFAULTS.get(key, default) if default is None else default
        return raw

    def int_value(self, key: str, default: int = 0) -> int:
        raw = self.value(key)
        try:
            return int(raw)
        except (TypeError, ValueError):
            return default

    def bool_value(self, key: str, default: bool = False) -> bool:
        raw = self.value(key)
        if raw is None:
            return default
        return str(raw).strip().lower() in {"1", "true", "yes", "si", "sí", "on"}

    def set_value(self, key: str, value: Any) -> None:
        os.environ[key] = str(value)

    def remove(self, key: str) -> None:
        os.environ.pop(key, None)

    @property
    def jobs(self) -> int:
        jobs = self.int_value(self.KEY_JOBS, -1)
        return jobs if jobs != 0 else -1

    @property
    def output_dir(self) -> str:
        return str(self.value(self.KEY_OUTPUT_DIR))


def get_settings() -> AppSettings:
    return AppSettings()


__all__ = ["AppSettings", "get_settings"]
