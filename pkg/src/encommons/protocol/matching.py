"""encommons.protocol.matching

Diagnosis keys, observation records, exposure matching and risk scoring.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

from .intervals import INTERVAL_SECONDS
from .keys import RollingProximityIdentifier, TemporaryExposureKey, rpi_bytes


class ReportType(Enum):
    CONFIRMED = "confirmed"
    PROBABLE = "probable"

    @classmethod
    def parse(cls, value: str | ReportType) -> ReportType:
        if isinstance(value, ReportType):
            return value
        try:
            return cls(value.lower())
        except ValueError as e:
            raise ValueError(f"unknown report type: {value!r}") from e


@dataclass(frozen=True, slots=True)
class DiagnosisKey:
    """A published TEK with its provenance metadata.

    Carries no person-identifying fields and no location.
    """

    tek: TemporaryExposureKey
    report_type: ReportType = ReportType.CONFIRMED
    pha_id: str | None = None
    region_tags: frozenset[str] = field(default_factory=frozenset)
    upload_time: int = 0
    origin_instance: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.region_tags, frozenset):
            object.__setattr__(self, "region_tags", frozenset(self.region_tags))

    @property
    def dedup_key(self) -> tuple[bytes, int]:
        return (self.tek.key_material, self.tek.day_start)

    def sort_key(self) -> tuple[int, str, bytes]:
        return (self.tek.day_start, self.pha_id or "", self.tek.key_material)


@dataclass(frozen=True, slots=True)
class ObservedBeacon:
    rpi: RollingProximityIdentifier
    interval: int
    attenuation_db: float
    duration_s: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.attenuation_db) or self.attenuation_db < 0:
            raise ValueError(f"attenuation_db must be finite and >= 0, got {self.attenuation_db}")
        if not 0 <= self.duration_s <= INTERVAL_SECONDS:
            raise ValueError(
                f"duration_s must be in [0, {INTERVAL_SECONDS}], got {self.duration_s}"
            )
        if self.interval < 0:
            raise ValueError(f"interval must be non-negative, got {self.interval}")


@dataclass(frozen=True, slots=True)
class ExposurePolicy:
    """PHA-defined thresholds turning raw matches into risk."""

    max_attenuation_db: float = 63.0
    min_total_duration_s: float = 300.0
    weight_confirmed: float = 1.0
    weight_probable: float = 0.5

    def __post_init__(self) -> None:
        if self.min_total_duration_s < 0:
            raise ValueError("min_total_duration_s must be >= 0")
        if self.weight_confirmed <= 0:
            raise ValueError("weight_confirmed must be > 0")
        if not 0 < self.weight_probable <= self.weight_confirmed:
            raise ValueError("weight_probable must be in (0, weight_confirmed]")

    def weight(self, report_type: ReportType) -> float:
        if report_type is ReportType.CONFIRMED:
            return self.weight_confirmed
        return self.weight_probable

    def to_dict(self) -> dict[str, float]:
        return {
            "max_attenuation_db": self.max_attenuation_db,
            "min_total_duration_s": self.min_total_duration_s,
            "weight_confirmed": self.weight_confirmed,
            "weight_probable": self.weight_probable,
        }

    def digest(self) -> bytes:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("ascii")).digest()


@dataclass(frozen=True, slots=True)
class ExposureMatch:
    key: DiagnosisKey
    matched_intervals: tuple[int, ...]
    total_duration_s: float
    min_attenuation_db: float


@dataclass(frozen=True, slots=True)
class RiskScore:
    value: float = 0.0

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True, slots=True)
class RPIIndex:
    """All identifiers of a key list, keyed by RPI bytes.

    Build once per key download and reuse for every observation log.
    """

    keys: tuple[DiagnosisKey, ...]
    lookup: dict[bytes, list[tuple[int, int]]]

    def __len__(self) -> int:
        return len(self.lookup)


def build_rpi_index(keys: Iterable[DiagnosisKey]) -> RPIIndex:
    ks = tuple(keys)
    lookup: dict[bytes, list[tuple[int, int]]] = {}
    for pos, k in enumerate(ks):
        material = k.tek.key_material
        for i in range(k.tek.day_start, k.tek.end):
            lookup.setdefault(rpi_bytes(material, i), []).append((pos, i))
    return RPIIndex(ks, lookup)


def match_exposures(
    keys: Sequence[DiagnosisKey],
    log: Iterable[ObservedBeacon],
    policy: ExposurePolicy,
    *,
    index: RPIIndex | None = None,
) -> list[ExposureMatch]:
    """Match an observation log against diagnosis keys.

    A log entry counts for a key when its RPI equals the key's RPI for the
    entry's interval and its attenuation is within policy. A match is emitted
    when the summed duration reaches ``policy.min_total_duration_s``.

    Results are ordered by (day_start, pha_id, key_material).
    """

    if index is None:
        index = build_rpi_index(keys)
    elif len(index.keys) != len(keys):
        raise ValueError("index was built from a different key list")

    intervals: dict[int, set[int]] = {}
    duration: dict[int, float] = {}
    min_att: dict[int, float] = {}

    for b in log:
        if b.attenuation_db > policy.max_attenuation_db:
            continue
        hits = index.lookup.get(b.rpi.value)
        if not hits:
            continue
        for pos, iv in hits:
            if iv != b.interval:
                continue
            intervals.setdefault(pos, set()).add(iv)
            duration[pos] = duration.get(pos, 0.0) + b.duration_s
            min_att[pos] = min(min_att.get(pos, math.inf), b.attenuation_db)

    out: list[ExposureMatch] = []
    for pos, ivs in intervals.items():
        total = duration[pos]
        if total <= 0 or total < policy.min_total_duration_s:
            continue
        out.append(
            ExposureMatch(
                key=index.keys[pos],
                matched_intervals=tuple(sorted(ivs)),
                total_duration_s=total,
                min_attenuation_db=min_att[pos],
            )
        )
    out.sort(key=lambda m: m.key.sort_key())
    return out


def score_risk(matches: Iterable[ExposureMatch], policy: ExposurePolicy) -> RiskScore:
    """Weighted exposure-seconds: sum of duration x report-type weight."""

    return RiskScore(
        float(sum(m.total_duration_s * policy.weight(m.key.report_type) for m in matches))
    )


def filter_keys(
    keys: Iterable[DiagnosisKey],
    *,
    pha_ids: Iterable[str] | None = None,
    region_tags: Iterable[str] | None = None,
    report_types: Iterable[ReportType] | None = None,
) -> list[DiagnosisKey]:
    """Scope downloaded keys on-device; ``None`` means no constraint."""

    phas = set(pha_ids) if pha_ids is not None else None
    regions = set(region_tags) if region_tags is not None else None
    types = set(report_types) if report_types is not None else None
    out = []
    for k in keys:
        if phas is not None and k.pha_id not in phas:
            continue
        if regions is not None and not (k.region_tags & regions):
            continue
        if types is not None and k.report_type not in types:
            continue
        out.append(k)
    return out
