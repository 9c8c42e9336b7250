"""Runtime configuration shared by the pipeline and the command line."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .metrics import FLIGHT_ENDPOINTS
from .segmenter import DEFAULT_IDLE_TIMEOUT_MS

STORE_ENV = "WILDKEY_STORE"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    idle_timeout_ms: int = DEFAULT_IDLE_TIMEOUT_MS
    max_distance: int = 2
    max_suggestions: int = 5
    flight_endpoints: str = "release_press"
    dictionary: str | None = None  # None: bundled English list
    store: str | None = None
    timezone: str = "UTC"

    def __post_init__(self):
        if not isinstance(self.idle_timeout_ms, int) or self.idle_timeout_ms <= 0:
            raise ConfigError("segmentation.idle_timeout_ms must be a positive integer")
        if not isinstance(self.max_distance, int) or not 0 <= self.max_distance <= 3:
            raise ConfigError("intent.max_distance must be an integer in [0, 3]")
        if not isinstance(self.max_suggestions, int) or self.max_suggestions < 1:
            raise ConfigError("intent.max_suggestions must be a positive integer")
        if self.flight_endpoints not in FLIGHT_ENDPOINTS:
            raise ConfigError(f"touch.flight_endpoints must be one of {FLIGHT_ENDPOINTS}")
        try:
            ZoneInfo(self.timezone)
        except (ZoneInfoNotFoundError, ValueError) as exc:
            raise ConfigError(f"unknown timezone {self.timezone!r}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "segmentation": {"idle_timeout_ms": self.idle_timeout_ms},
            "intent": {"max_distance": self.max_distance, "max_suggestions": self.max_suggestions},
            "touch": {"flight_endpoints": self.flight_endpoints},
            "dictionary": self.dictionary,
            "store": self.store,
            "timezone": self.timezone,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any], **overrides: Any) -> Config:
        """Build from the nested file layout; non-None *overrides* win over file values."""
        known = {"segmentation", "intent", "touch", "dictionary", "store", "timezone"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        flat: dict[str, Any] = {}
        for section, keys in (
            ("segmentation", {"idle_timeout_ms"}),
            ("intent", {"max_distance", "max_suggestions"}),
            ("touch", {"flight_endpoints"}),
        ):
            sub = d.get(section, {})
            bad = set(sub) - keys
            if bad:
                raise ConfigError(f"unknown keys in {section}: {sorted(bad)}")
            flat.update(sub)
        for k in ("dictionary", "store", "timezone"):
            if k in d:
                flat[k] = d[k]
        flat.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**flat)

    def override(self, **values: Any) -> Config:
        """Copy with every non-None value applied."""
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def store_path(self) -> Path | None:
        path = self.store or os.environ.get(STORE_ENV)
        return Path(path) if path else None


def load_config(path: str | Path | None, **overrides: Any) -> Config:
    if path is None:
        return Config.from_dict({}, **overrides)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return Config.from_dict(doc, **overrides)


def dump_config(config: Config) -> str:
    return json.dumps(config.to_dict(), indent=2)
