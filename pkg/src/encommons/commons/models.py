"""encommons.commons.models

Commons records and their JSON forms.

The key store schema is closed: a record holds a diagnosis key, the OTA token
that authorized it, its arrival interval, origin instance and sequence number,
nothing else.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from encommons.protocol.keys import TemporaryExposureKey
from encommons.protocol.matching import DiagnosisKey, ReportType

KEY_RECORD_FIELDS = frozenset(
    {"diagnosis_key", "ota_token", "received_at", "origin_instance", "seq"}
)
DIAGNOSIS_KEY_FIELDS = frozenset(
    {"tek", "report_type", "pha_id", "region_tags", "upload_time", "origin_instance"}
)
TEK_FIELDS = frozenset({"key_material", "day_start", "rolling_period"})


@dataclass(frozen=True, slots=True)
class PHARecord:
    pha_id: str
    public_key: bytes
    display_name: str = ""
    region_tags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.pha_id:
            raise ValueError("pha_id must be non-empty")
        if not self.public_key:
            raise ValueError("public_key must be non-empty")
        object.__setattr__(self, "region_tags", frozenset(self.region_tags))


@dataclass(frozen=True, slots=True)
class OneTimeAuthorization:
    token: bytes
    issuer: str
    report_type: ReportType
    authorized_days: tuple[int, int]
    expiry: int
    forward_tags: frozenset[str] = field(default_factory=frozenset)
    region_tags: frozenset[str] = field(default_factory=frozenset)
    used: bool = False
    commons_forwarding: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "forward_tags", frozenset(self.forward_tags))
        object.__setattr__(self, "region_tags", frozenset(self.region_tags))
        object.__setattr__(self, "authorized_days", tuple(self.authorized_days))

    def covers_day(self, day_start: int) -> bool:
        first, last = self.authorized_days
        return first <= day_start <= last


@dataclass(frozen=True, slots=True)
class KeyStoreRecord:
    diagnosis_key: DiagnosisKey
    ota_token: bytes
    received_at: int
    origin_instance: str
    seq: int = 0

    @property
    def dedup_key(self) -> tuple[bytes, int]:
        return self.diagnosis_key.dedup_key


@dataclass(frozen=True, slots=True)
class DownloadFilter:
    """Absent fields mean no constraint."""

    since: int | None = None
    pha_ids: frozenset[str] | None = None
    region_tags: frozenset[str] | None = None
    report_types: frozenset[ReportType] | None = None

    def matches(self, record: KeyStoreRecord) -> bool:
        k = record.diagnosis_key
        if self.since is not None and record.received_at < self.since:
            return False
        if self.pha_ids is not None and k.pha_id not in self.pha_ids:
            return False
        if self.region_tags is not None and not (k.region_tags & self.region_tags):
            return False
        if self.report_types is not None and k.report_type not in self.report_types:
            return False
        return True


@dataclass(frozen=True, slots=True)
class Subscription:
    subscription_id: str
    remote_instance: str
    filter: DownloadFilter = field(default_factory=DownloadFilter)
    cursor: int = 0


class UploadState(Enum):
    PENDING = "pending"
    FULFILLED = "fulfilled"


@dataclass(frozen=True, slots=True)
class UploadStatus:
    state: UploadState
    received_at: int | None = None


@dataclass(frozen=True, slots=True)
class UploadReceipt:
    token_hex: str
    accepted: int
    received_at: int
    forwarded_to: tuple[str, ...] = ()


def assert_closed_schema() -> None:
    """Fail loudly if the store schema grew a field outside the closed set."""

    checks = [
        (KeyStoreRecord, KEY_RECORD_FIELDS),
        (DiagnosisKey, DIAGNOSIS_KEY_FIELDS),
        (TemporaryExposureKey, TEK_FIELDS),
    ]
    for cls, allowed in checks:
        names = {f.name for f in dataclasses.fields(cls)}
        if names != allowed:
            raise AssertionError(f"{cls.__name__} fields {sorted(names)} != {sorted(allowed)}")


"""
=== JSON forms ===
"""


def key_to_dict(k: DiagnosisKey) -> dict[str, Any]:
    return {
        "tek_hex": k.tek.hex,
        "day_start": k.tek.day_start,
        "rolling_period": k.tek.rolling_period,
        "report_type": k.report_type.value,
        "pha_id": k.pha_id,
        "region_tags": sorted(k.region_tags),
        "upload_time": k.upload_time,
        "origin_instance": k.origin_instance,
    }


def key_from_dict(d: dict[str, Any]) -> DiagnosisKey:
    return DiagnosisKey(
        tek=TemporaryExposureKey.from_hex(
            d["tek_hex"], int(d["day_start"]), int(d.get("rolling_period", 96))
        ),
        report_type=ReportType.parse(d.get("report_type", "confirmed")),
        pha_id=d.get("pha_id"),
        region_tags=frozenset(d.get("region_tags", ())),
        upload_time=int(d.get("upload_time", 0)),
        origin_instance=d.get("origin_instance"),
    )


def record_to_dict(r: KeyStoreRecord) -> dict[str, Any]:
    return {
        "key": key_to_dict(r.diagnosis_key),
        "ota_token": r.ota_token.hex(),
        "received_at": r.received_at,
        "origin_instance": r.origin_instance,
        "seq": r.seq,
    }


def record_from_dict(d: dict[str, Any]) -> KeyStoreRecord:
    return KeyStoreRecord(
        diagnosis_key=key_from_dict(d["key"]),
        ota_token=bytes.fromhex(d["ota_token"]),
        received_at=int(d["received_at"]),
        origin_instance=d["origin_instance"],
        seq=int(d.get("seq", 0)),
    )


def ota_to_dict(o: OneTimeAuthorization) -> dict[str, Any]:
    return {
        "token": o.token.hex(),
        "issuer": o.issuer,
        "report_type": o.report_type.value,
        "authorized_days": list(o.authorized_days),
        "expiry": o.expiry,
        "forward_tags": sorted(o.forward_tags),
        "region_tags": sorted(o.region_tags),
        "used": o.used,
        "commons_forwarding": o.commons_forwarding,
    }


def ota_from_dict(d: dict[str, Any]) -> OneTimeAuthorization:
    return OneTimeAuthorization(
        token=bytes.fromhex(d["token"]),
        issuer=d["issuer"],
        report_type=ReportType.parse(d["report_type"]),
        authorized_days=(int(d["authorized_days"][0]), int(d["authorized_days"][1])),
        expiry=int(d["expiry"]),
        forward_tags=frozenset(d.get("forward_tags", ())),
        region_tags=frozenset(d.get("region_tags", ())),
        used=bool(d.get("used", False)),
        commons_forwarding=bool(d.get("commons_forwarding", True)),
    )


def filter_to_dict(f: DownloadFilter) -> dict[str, Any]:
    return {
        "since": f.since,
        "pha_ids": sorted(f.pha_ids) if f.pha_ids is not None else None,
        "region_tags": sorted(f.region_tags) if f.region_tags is not None else None,
        "report_types": sorted(t.value for t in f.report_types)
        if f.report_types is not None
        else None,
    }


def filter_from_dict(d: dict[str, Any] | None) -> DownloadFilter:
    if not d:
        return DownloadFilter()
    return DownloadFilter(
        since=d.get("since"),
        pha_ids=frozenset(d["pha_ids"]) if d.get("pha_ids") is not None else None,
        region_tags=frozenset(d["region_tags"]) if d.get("region_tags") is not None else None,
        report_types=frozenset(ReportType.parse(t) for t in d["report_types"])
        if d.get("report_types") is not None
        else None,
    )
