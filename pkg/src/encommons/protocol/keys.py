"""encommons.protocol.keys

Temporary Exposure Keys and Rolling Proximity Identifier derivation.

RPI = HMAC-SHA256(key=tek.key_material, msg=b"EN-RPI" || LE32(interval))[:16]
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass
from typing import Protocol

from cryptography.hazmat.primitives import hashes, hmac

from .intervals import INTERVALS_PER_DAY, IntervalError, require_day_aligned

TEK_LENGTH = 16
RPI_LENGTH = 16
RPI_LABEL = b"EN-RPI"


class KeyScheduleError(ValueError):
    """Invalid key material or interval for a key schedule."""


class EntropySource(Protocol):
    """Anything that hands out random bytes (``numpy.random.Generator`` qualifies)."""

    def bytes(self, length: int) -> bytes: ...


class SystemEntropy:
    """Cryptographically secure entropy from the OS."""

    def bytes(self, length: int) -> bytes:
        return secrets.token_bytes(length)


@dataclass(frozen=True, slots=True)
class TemporaryExposureKey:
    key_material: bytes
    day_start: int
    rolling_period: int = INTERVALS_PER_DAY

    def __post_init__(self) -> None:
        if len(self.key_material) != TEK_LENGTH:
            raise KeyScheduleError(
                f"key_material must be {TEK_LENGTH} bytes, got {len(self.key_material)}"
            )
        try:
            require_day_aligned(self.day_start)
        except IntervalError as e:
            raise KeyScheduleError(str(e)) from e
        if not 1 <= self.rolling_period <= INTERVALS_PER_DAY:
            raise KeyScheduleError(
                f"rolling_period must be in [1, {INTERVALS_PER_DAY}], got {self.rolling_period}"
            )

    @property
    def hex(self) -> str:
        return self.key_material.hex()

    @property
    def end(self) -> int:
        """First interval after the key's validity."""
        return self.day_start + self.rolling_period

    def covers(self, interval: int) -> bool:
        return self.day_start <= interval < self.end

    @classmethod
    def from_hex(cls, tek_hex: str, day_start: int, rolling_period: int = INTERVALS_PER_DAY):
        try:
            raw = bytes.fromhex(tek_hex)
        except ValueError as e:
            raise KeyScheduleError(f"malformed TEK hex: {tek_hex!r}") from e
        return cls(raw, day_start, rolling_period)


@dataclass(frozen=True, slots=True)
class RollingProximityIdentifier:
    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != RPI_LENGTH:
            raise KeyScheduleError(f"RPI must be {RPI_LENGTH} bytes, got {len(self.value)}")

    @property
    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, rpi_hex: str) -> RollingProximityIdentifier:
        try:
            return cls(bytes.fromhex(rpi_hex))
        except ValueError as e:
            raise KeyScheduleError(f"malformed RPI hex: {rpi_hex!r}") from e


def generate_tek(entropy: EntropySource, day_start: int) -> TemporaryExposureKey:
    """Draw a fresh daily key for the day starting at ``day_start``."""

    try:
        require_day_aligned(day_start)
    except IntervalError as e:
        raise KeyScheduleError(str(e)) from e
    return TemporaryExposureKey(bytes(entropy.bytes(TEK_LENGTH)), day_start)


def rpi_bytes(key_material: bytes, interval: int) -> bytes:
    h = hmac.HMAC(key_material, hashes.SHA256())
    h.update(RPI_LABEL + struct.pack("<I", interval))
    return h.finalize()[:RPI_LENGTH]


def derive_rpi(tek: TemporaryExposureKey, interval: int) -> RollingProximityIdentifier:
    """Derive the identifier broadcast during ``interval``."""

    if not tek.covers(interval):
        raise KeyScheduleError(
            f"interval {interval} outside key period [{tek.day_start}, {tek.end})"
        )
    return RollingProximityIdentifier(rpi_bytes(tek.key_material, interval))


def derive_rpi_sequence(tek: TemporaryExposureKey) -> list[RollingProximityIdentifier]:
    """All identifiers of a key, element ``j`` for interval ``day_start + j``."""

    return [
        RollingProximityIdentifier(rpi_bytes(tek.key_material, i))
        for i in range(tek.day_start, tek.end)
    ]
