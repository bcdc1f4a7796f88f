"""encommons.commons.store

Append-only key store plus the JSON-lines journal an instance replays on start.

Records are never updated or deleted. Each appended record gets the next
sequence number; a (key_material, day_start) pair is stored at most once.
"""

from __future__ import annotations

import json
import os
import threading
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from encommons.logs import get_logger

from .models import DownloadFilter, KeyStoreRecord

logger = get_logger(__name__)


class JournalError(RuntimeError):
    """Unreadable journal line."""


@dataclass
class Journal:
    """One JSON event per line; appends are flushed and fsynced before returning."""

    path: Path
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        if not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()
            logger.info(f"journal created at {self.path}")

    def append(self, event: str, payload: dict[str, Any]) -> None:
        line = json.dumps({"event": event, **payload}, sort_keys=True)
        with self._lock, self.path.open("a", encoding="utf-8", newline="\n") as f:
            f.write(line + "\n")
            f.flush()
            os.fsync(f.fileno())

    def replay(self) -> Iterator[dict[str, Any]]:
        with self.path.open("r", encoding="utf-8") as f:
            for n, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as e:
                    # a torn final write is the only expected corruption
                    raise JournalError(f"{self.path}:{n}: {e}") from e


@dataclass
class KeyStore:
    _records: list[KeyStoreRecord] = field(default_factory=list)
    _seen: set[tuple[bytes, int]] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def last_seq(self) -> int:
        return self._records[-1].seq if self._records else 0

    def contains(self, record: KeyStoreRecord) -> bool:
        return record.dedup_key in self._seen

    def append(self, records: Iterable[KeyStoreRecord]) -> list[KeyStoreRecord]:
        """Append unseen records with fresh sequence numbers; return what was stored.

        Callers serialize appends.
        """

        stored = []
        for r in records:
            if r.dedup_key in self._seen:
                continue
            r = replace(r, seq=self.last_seq + 1)
            self._records.append(r)
            self._seen.add(r.dedup_key)
            stored.append(r)
        return stored

    def restore(self, record: KeyStoreRecord) -> None:
        """Re-insert a journaled record keeping its sequence number."""

        if record.seq <= self.last_seq:
            raise JournalError(f"non-monotonic sequence {record.seq} after {self.last_seq}")
        self._records.append(record)
        self._seen.add(record.dedup_key)

    def snapshot(self) -> tuple[KeyStoreRecord, ...]:
        # prefix of an append-only list; safe to read without the writer lock
        return tuple(self._records[: len(self._records)])

    def scan(
        self, flt: DownloadFilter, cursor: int = 0, limit: int | None = None
    ) -> list[KeyStoreRecord]:
        out = []
        for r in self.snapshot():
            if r.seq <= cursor or not flt.matches(r):
                continue
            out.append(r)
            if limit is not None and len(out) >= limit:
                break
        return out
