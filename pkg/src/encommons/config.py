"""encommons.config

Runtime settings read from the environment.

- ``EN_COMMONS_DATA``: instance data directory (default ``data/commons``)
- ``EN_COMMONS_INSTANCE``: instance identifier (default ``local``)
- ``EN_COMMONS_RETENTION_DAYS``: device key retention (default 14)
- ``EN_COMMONS_HOST`` / ``EN_COMMONS_PORT``: bind address for ``commons serve``
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from encommons.device.state import DEFAULT_RETENTION_DAYS

DEFAULT_DATA_DIR = "data/commons"
DEFAULT_INSTANCE_ID = "local"
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8080


class ConfigError(RuntimeError):
    """Invalid setting value."""


def _int_env(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from e


@dataclass(frozen=True, slots=True)
class Settings:
    data_dir: Path = Path(DEFAULT_DATA_DIR)
    instance_id: str = DEFAULT_INSTANCE_ID
    retention_days: int = DEFAULT_RETENTION_DAYS
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT

    def __post_init__(self) -> None:
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        if self.retention_days < 1:
            raise ConfigError(f"retention_days must be >= 1, got {self.retention_days}")
        if not self.instance_id:
            raise ConfigError("instance_id must be non-empty")

    @classmethod
    def from_env(cls) -> Settings:
        return cls(
            data_dir=Path(os.environ.get("EN_COMMONS_DATA", DEFAULT_DATA_DIR)),
            instance_id=os.environ.get("EN_COMMONS_INSTANCE", DEFAULT_INSTANCE_ID),
            retention_days=_int_env("EN_COMMONS_RETENTION_DAYS", DEFAULT_RETENTION_DAYS),
            host=os.environ.get("EN_COMMONS_HOST", DEFAULT_HOST),
            port=_int_env("EN_COMMONS_PORT", DEFAULT_PORT),
        )

    def with_data_dir(self, data_dir: str | Path | None) -> Settings:
        """A flag beats the environment."""
        if data_dir is None:
            return self
        return replace(self, data_dir=Path(data_dir))

    @property
    def journal_path(self) -> Path:
        return self.data_dir / "journal.jsonl"

    @property
    def instance_file(self) -> Path:
        return self.data_dir / "instance.json"

    @property
    def admin_key_path(self) -> Path:
        return self.data_dir / "admin.key"

    def pha_key_path(self, pha_id: str) -> Path:
        return self.data_dir / "phas" / f"{pha_id}.key"
