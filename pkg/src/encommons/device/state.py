"""encommons.device.state

Protocol participants: phones, active lighthouses and transmit-only lighthouses.

Every operation takes a ``DeviceState`` and returns a new one (or a value);
states are never mutated in place.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING

from encommons.protocol.intervals import (
    INTERVALS_PER_DAY,
    IntervalError,
    day_start_of,
    require_day_aligned,
)
from encommons.protocol.keys import (
    EntropySource,
    RollingProximityIdentifier,
    TemporaryExposureKey,
    derive_rpi,
    generate_tek,
)
from encommons.protocol.matching import (
    DiagnosisKey,
    ExposureMatch,
    ExposurePolicy,
    ObservedBeacon,
    RiskScore,
    RPIIndex,
    match_exposures,
    score_risk,
)

if TYPE_CHECKING:
    from encommons.commons.models import OneTimeAuthorization

DEFAULT_RETENTION_DAYS = 14


class DeviceError(RuntimeError):
    """Base error for device state transitions."""


class PassiveListenError(DeviceError):
    def __init__(self) -> None:
        super().__init__("passive device cannot listen")


class RoleError(DeviceError):
    """Operation not available for the device's role."""


class DayTransitionError(DeviceError):
    """Non-monotonic or unaligned day change."""


class OutsideCurrentDayError(DeviceError):
    """Interval not covered by the current key; advance the day first."""


class NoKeysInRangeError(DeviceError):
    def __init__(self, first: int, last: int) -> None:
        super().__init__(f"no keys in range [{first}, {last}]")


class AuthorizationRangeError(DeviceError):
    """Requested days fall outside the authorization."""


class DeviceRole(Enum):
    PHONE = "phone"
    LIGHTHOUSE_ACTIVE = "lighthouse_active"
    LIGHTHOUSE_PASSIVE = "lighthouse_passive"

    @property
    def is_lighthouse(self) -> bool:
        return self is not DeviceRole.PHONE

    @property
    def listens(self) -> bool:
        return self is not DeviceRole.LIGHTHOUSE_PASSIVE


@dataclass(frozen=True, slots=True)
class DeviceState:
    """A device's keys and what it has heard.

    ``place_label`` is local-only and never leaves the device.
    """

    role: DeviceRole
    current_tek: TemporaryExposureKey
    tek_history: tuple[TemporaryExposureKey, ...] = ()
    observation_log: tuple[ObservedBeacon, ...] = ()
    retention_days: int = DEFAULT_RETENTION_DAYS
    place_label: str | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.retention_days < 1:
            raise DeviceError("retention_days must be >= 1")
        starts = [k.day_start for k in self.tek_history]
        if any(a >= b for a, b in zip(starts, starts[1:], strict=False)):
            raise DeviceError("tek_history day starts must be strictly increasing")
        if not self.role.listens and self.observation_log:
            raise PassiveListenError()
        if self.place_label is not None and not self.role.is_lighthouse:
            raise RoleError("place_label is only meaningful for lighthouses")

    @property
    def keys(self) -> tuple[TemporaryExposureKey, ...]:
        """History plus the current key, oldest first."""
        return (*self.tek_history, self.current_tek)


def device_new(
    role: DeviceRole,
    entropy: EntropySource,
    now: int,
    retention_days: int = DEFAULT_RETENTION_DAYS,
    *,
    place_label: str | None = None,
) -> DeviceState:
    """Create a device holding a fresh key for the day containing ``now``."""

    if retention_days < 1:
        raise DeviceError("retention_days must be >= 1")
    return DeviceState(
        role=role,
        current_tek=generate_tek(entropy, day_start_of(now)),
        retention_days=retention_days,
        place_label=place_label,
    )


def _retention_cutoff(device: DeviceState, day_start: int) -> int:
    return day_start - device.retention_days * INTERVALS_PER_DAY


def advance_day(device: DeviceState, entropy: EntropySource, new_day_start: int) -> DeviceState:
    """Retire the current key into history and start a new day."""

    try:
        require_day_aligned(new_day_start)
    except IntervalError as e:
        raise DayTransitionError(str(e)) from e
    if new_day_start <= device.current_tek.day_start:
        raise DayTransitionError(
            f"new day start {new_day_start} must be after {device.current_tek.day_start}"
        )

    cutoff = _retention_cutoff(device, new_day_start)
    history = tuple(k for k in device.keys if k.day_start >= cutoff)[-device.retention_days :]
    log = tuple(b for b in device.observation_log if b.interval >= cutoff)
    return replace(
        device,
        current_tek=generate_tek(entropy, new_day_start),
        tek_history=history,
        observation_log=log,
    )


def current_broadcast(device: DeviceState, now: int) -> RollingProximityIdentifier:
    """The identifier the device advertises during ``now`` (all roles broadcast)."""

    if not device.current_tek.covers(now):
        raise OutsideCurrentDayError(
            f"interval {now} outside current day starting {device.current_tek.day_start}"
        )
    return derive_rpi(device.current_tek, now)


def record_observation(
    device: DeviceState,
    rpi: RollingProximityIdentifier,
    now: int,
    attenuation_db: float,
    duration_s: float,
) -> DeviceState:
    if not device.role.listens:
        raise PassiveListenError()

    beacon = ObservedBeacon(rpi, now, float(attenuation_db), float(duration_s))
    cutoff = _retention_cutoff(device, day_start_of(now))
    log = tuple(b for b in device.observation_log if b.interval >= cutoff) + (beacon,)
    return replace(device, observation_log=log)


def self_check(
    device: DeviceState,
    keys: Sequence[DiagnosisKey],
    policy: ExposurePolicy,
    *,
    index: RPIIndex | None = None,
) -> tuple[RiskScore, list[ExposureMatch]]:
    """Local exposure check over the device's own log; no state change."""

    matches = match_exposures(keys, device.observation_log, policy, index=index)
    return score_risk(matches, policy), matches


def publish_keys(
    device: DeviceState,
    day_range: tuple[int, int],
    ota: OneTimeAuthorization,
) -> list[TemporaryExposureKey]:
    """Keys from history and the current day whose day start lies in ``day_range``."""

    first, last = day_range
    auth_first, auth_last = ota.authorized_days
    if first > last:
        raise AuthorizationRangeError(f"empty day range [{first}, {last}]")
    if first < auth_first or last > auth_last:
        raise AuthorizationRangeError(
            f"day range [{first}, {last}] outside authorization [{auth_first}, {auth_last}]"
        )

    out = [k for k in device.keys if first <= k.day_start <= last]
    if not out:
        raise NoKeysInRangeError(first, last)
    return out
