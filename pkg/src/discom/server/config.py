"""Server configuration: defaults < config file < environment < flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from discom.errors import IntegrityError

ENV_PREFIX = "DISCOM_"


@dataclass
class ServerConfig:
    data_dir: str = "./discom-data"
    host: str = "127.0.0.1"
    port: int = 8787
    sweep_interval: float = 60.0  # seconds; <= 0 disables the fallback sweep
    workers: int = 2
    admin_token: str = "admin"  # dev default; override in any real deployment

    @property
    def listen(self) -> str:
        return f"{self.host}:{self.port}"


def _parse_listen(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise IntegrityError(f"listen address must be host:port, got {value!r}")
    try:
        return host, int(port)
    except ValueError:
        raise IntegrityError(f"bad port in listen address {value!r}") from None


def load_config(config_file: str | Path | None = None,
                env: Mapping[str, str] | None = None,
                overrides: Mapping[str, Any] | None = None) -> ServerConfig:
    """Assemble config; later sources win (file, then env, then overrides)."""
    cfg = ServerConfig()
    if config_file:
        path = Path(config_file)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IntegrityError(f"cannot read config file {path}: {exc}") from None
        _apply(cfg, raw)
    env = os.environ if env is None else env
    env_values: dict[str, Any] = {}
    for key in ("DATA_DIR", "LISTEN", "SWEEP_INTERVAL", "WORKERS", "ADMIN_TOKEN"):
        value = env.get(ENV_PREFIX + key)
        if value is not None:
            env_values[key.lower()] = value
    _apply(cfg, env_values)
    if overrides:
        _apply(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg


def _apply(cfg: ServerConfig, values: Mapping[str, Any]) -> None:
    known = {f.name for f in fields(ServerConfig)}
    for key, value in values.items():
        if key == "listen":
            cfg.host, cfg.port = _parse_listen(str(value))
            continue
        if key not in known:
            raise IntegrityError(f"unknown config key {key!r}")
        if key in ("port", "workers"):
            value = int(value)
        elif key == "sweep_interval":
            value = float(value)
        setattr(cfg, key, value)
