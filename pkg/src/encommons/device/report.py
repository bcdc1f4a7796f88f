"""encommons.device.report

Aggregate risk reports from active lighthouses.

Only per-day counts and weighted risk leave the device; the underlying
identifiers never do.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass

import pandas as pd

from encommons.protocol.intervals import INTERVALS_PER_DAY
from encommons.protocol.matching import DiagnosisKey, ExposurePolicy, RPIIndex

from .state import DeviceRole, DeviceState, RoleError, self_check


@dataclass(frozen=True, slots=True)
class DayRisk:
    day_start: int
    match_count: int
    weighted_risk: float


@dataclass(frozen=True, slots=True)
class AggregateRiskReport:
    device_pseudonym: str
    per_day: tuple[DayRisk, ...]
    policy_digest: bytes

    @property
    def total_risk(self) -> float:
        return sum(d.weighted_risk for d in self.per_day)

    @property
    def exposed_days(self) -> list[int]:
        return [d.day_start for d in self.per_day if d.weighted_risk > 0]


def _require_active_lighthouse(device: DeviceState) -> None:
    if device.role is DeviceRole.LIGHTHOUSE_PASSIVE:
        raise RoleError("passive lighthouse keeps no log to report on")
    if device.role is not DeviceRole.LIGHTHOUSE_ACTIVE:
        raise RoleError(f"risk reports require an active lighthouse, got {device.role.value}")


def make_risk_report(
    device: DeviceState,
    keys: Sequence[DiagnosisKey],
    policy: ExposurePolicy,
    pseudonym: str,
    *,
    index: RPIIndex | None = None,
) -> AggregateRiskReport:
    """Summarize self-check matches per diagnosis-key day.

    Days without matches are omitted, so a clean lighthouse reports an empty list.
    """

    _require_active_lighthouse(device)
    _, matches = self_check(device, keys, policy, index=index)

    counts: dict[int, int] = {}
    risk: dict[int, float] = {}
    for m in matches:
        d = m.key.tek.day_start
        counts[d] = counts.get(d, 0) + 1
        risk[d] = risk.get(d, 0.0) + m.total_duration_s * policy.weight(m.key.report_type)

    per_day = tuple(DayRisk(d, counts[d], risk[d]) for d in sorted(counts))
    return AggregateRiskReport(pseudonym, per_day, policy.digest())


def exposure_timeline(
    device: DeviceState,
    keys: Sequence[DiagnosisKey],
    policy: ExposurePolicy,
    *,
    index: RPIIndex | None = None,
) -> pd.Series:
    """Matched interval counts by time of day (slot 0..95) for a lighthouse owner."""

    _require_active_lighthouse(device)
    _, matches = self_check(device, keys, policy, index=index)
    slots = [iv % INTERVALS_PER_DAY for m in matches for iv in m.matched_intervals]
    out = (
        pd.Series(slots, dtype="int64")
        .value_counts()
        .reindex(range(INTERVALS_PER_DAY), fill_value=0)
        .astype("int64")
    )
    out.index.name = "slot"
    out.name = "exposures"
    return out


def report_to_json(report: AggregateRiskReport) -> str:
    return json.dumps(
        {
            "pseudonym": report.device_pseudonym,
            "policy_digest_hex": report.policy_digest.hex(),
            "per_day": [
                {
                    "day_start": d.day_start,
                    "match_count": d.match_count,
                    "weighted_risk": d.weighted_risk,
                }
                for d in report.per_day
            ],
        },
        sort_keys=True,
    )


def report_from_json(text: str) -> AggregateRiskReport:
    raw = json.loads(text)
    return AggregateRiskReport(
        device_pseudonym=raw["pseudonym"],
        per_day=tuple(
            DayRisk(int(d["day_start"]), int(d["match_count"]), float(d["weighted_risk"]))
            for d in raw["per_day"]
        ),
        policy_digest=bytes.fromhex(raw["policy_digest_hex"]),
    )
