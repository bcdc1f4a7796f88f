"""encommons.device

Phones and lighthouses: key rotation, listening, self checks, key
publication, aggregate risk reports and receipt codes.
"""

from .receipts import (
    ReceiptCode,
    ReceiptCodeError,
    check_receipt_code,
    decode_receipt_code,
    encode_receipt_code,
    make_receipt_code,
)
from .report import (
    AggregateRiskReport,
    DayRisk,
    exposure_timeline,
    make_risk_report,
    report_from_json,
    report_to_json,
)
from .state import (
    DEFAULT_RETENTION_DAYS,
    AuthorizationRangeError,
    DayTransitionError,
    DeviceError,
    DeviceRole,
    DeviceState,
    NoKeysInRangeError,
    OutsideCurrentDayError,
    PassiveListenError,
    RoleError,
    advance_day,
    current_broadcast,
    device_new,
    publish_keys,
    record_observation,
    self_check,
)

__all__ = [
    "DEFAULT_RETENTION_DAYS",
    "DeviceRole",
    "DeviceState",
    "DeviceError",
    "PassiveListenError",
    "RoleError",
    "DayTransitionError",
    "OutsideCurrentDayError",
    "NoKeysInRangeError",
    "AuthorizationRangeError",
    "device_new",
    "advance_day",
    "current_broadcast",
    "record_observation",
    "self_check",
    "publish_keys",
    "AggregateRiskReport",
    "DayRisk",
    "make_risk_report",
    "exposure_timeline",
    "report_to_json",
    "report_from_json",
    "ReceiptCode",
    "ReceiptCodeError",
    "encode_receipt_code",
    "decode_receipt_code",
    "make_receipt_code",
    "check_receipt_code",
]
