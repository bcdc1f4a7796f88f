"""encommons.device.receipts

Printed receipt codes: a 10-byte RPI prefix plus the interval, in unpadded
RFC 4648 base32, checkable later against published keys.
"""

from __future__ import annotations

import base64
import binascii
import struct
from collections.abc import Iterable
from dataclasses import dataclass

from encommons.protocol.keys import rpi_bytes
from encommons.protocol.matching import DiagnosisKey

from .state import DeviceError, DeviceState, RoleError, current_broadcast

PREFIX_LENGTH = 10
_PAYLOAD_LENGTH = PREFIX_LENGTH + 4


class ReceiptCodeError(DeviceError, ValueError):
    """Malformed receipt code string."""


@dataclass(frozen=True, slots=True)
class ReceiptCode:
    code: str

    def __str__(self) -> str:
        return self.code


def encode_receipt_code(prefix: bytes, interval: int) -> ReceiptCode:
    if len(prefix) != PREFIX_LENGTH:
        raise ReceiptCodeError(f"prefix must be {PREFIX_LENGTH} bytes, got {len(prefix)}")
    if not 0 <= interval < 2**32:
        raise ReceiptCodeError(f"interval out of range: {interval}")
    payload = prefix + struct.pack(">I", interval)
    return ReceiptCode(base64.b32encode(payload).decode("ascii").rstrip("="))


def decode_receipt_code(code: ReceiptCode | str) -> tuple[bytes, int]:
    """Return ``(prefix, interval)``; tolerant of case and surrounding whitespace."""

    text = str(code).strip().upper()
    padded = text + "=" * (-len(text) % 8)
    try:
        payload = base64.b32decode(padded)
    except (binascii.Error, ValueError) as e:
        raise ReceiptCodeError(f"malformed receipt code: {text!r}") from e
    if len(payload) != _PAYLOAD_LENGTH:
        raise ReceiptCodeError(f"receipt code decodes to {len(payload)} bytes, expected 14")
    (interval,) = struct.unpack(">I", payload[PREFIX_LENGTH:])
    return payload[:PREFIX_LENGTH], interval


def make_receipt_code(device: DeviceState, now: int) -> ReceiptCode:
    if not device.role.is_lighthouse:
        raise RoleError("only lighthouses print receipt codes")
    rpi = current_broadcast(device, now)
    return encode_receipt_code(rpi.value[:PREFIX_LENGTH], now)


def check_receipt_code(code: ReceiptCode | str, keys: Iterable[DiagnosisKey]) -> bool:
    """True iff some key's RPI at the code's interval starts with the code's prefix."""

    prefix, interval = decode_receipt_code(code)
    for k in keys:
        if not k.tek.covers(interval):
            continue
        if rpi_bytes(k.tek.key_material, interval)[:PREFIX_LENGTH] == prefix:
            return True
    return False
