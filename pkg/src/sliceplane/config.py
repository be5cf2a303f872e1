"""Service configuration loading and validation.

Input fixture paths must exist at load time (fail loudly at startup);
output paths (audit log, slice store) are created on demand.  Relative
paths resolve against the config file's directory, so a config directory
is self-contained.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8470
    audit_log_path: str = "data/audit.jsonl"
    slice_store_path: str = "data/slices.jsonl"
    offers_path: str = "fixtures/offers.json"
    clusters_path: str = "fixtures/clusters.json"
    policies_path: str = "fixtures/policies.json"
    tools_path: str = "fixtures/tools.json"
    scenario_path: Optional[str] = None
    consortium_n: int = 3
    window_ticks: int = 10
    hysteresis: int = 3
    cooldown_ticks: int = 60
    backend_mode: str = "mock"
    auto_approve: bool = True
    seed: int = 0
    # > 0 starts a background pump advancing the sim clock this often
    tick_interval_ms: int = 0

    def __post_init__(self):
        if self.consortium_n < 1:
            raise ConfigError("consortium_n", "must be >= 1")
        if self.window_ticks < 1:
            raise ConfigError("window_ticks", "must be >= 1")
        if self.hysteresis < 1:
            raise ConfigError("hysteresis", "must be >= 1")
        if self.cooldown_ticks < 0:
            raise ConfigError("cooldown_ticks", "must be >= 0")
        if self.backend_mode != "mock":
            raise ConfigError("backend_mode", f"unsupported mode {self.backend_mode!r}")

    def validate_files(self) -> None:
        for name in ("offers_path", "clusters_path", "policies_path", "tools_path"):
            path = getattr(self, name)
            if not os.path.exists(path):
                raise ConfigError(name, f"file not found: {path}")
        if self.scenario_path is not None and not os.path.exists(self.scenario_path):
            raise ConfigError("scenario_path", f"file not found: {self.scenario_path}")


_KNOWN_KEYS = set(ServiceConfig.__dataclass_fields__)
_PATH_KEYS = (
    "audit_log_path",
    "slice_store_path",
    "offers_path",
    "clusters_path",
    "policies_path",
    "tools_path",
    "scenario_path",
)


def load_config(path: str) -> ServiceConfig:
    if not os.path.exists(path):
        raise ConfigError("config", f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ConfigError("config", f"unknown keys: {sorted(unknown)}")
    base = os.path.dirname(os.path.abspath(path))
    for key in _PATH_KEYS:
        value = doc.get(key)
        if value is not None and not os.path.isabs(value):
            doc[key] = os.path.join(base, value)
    config = ServiceConfig(**doc)
    config.validate_files()
    return config
