import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from encommons.commons.models import OneTimeAuthorization  # noqa: E402
from encommons.device import (  # noqa: E402
    AuthorizationRangeError,
    DayTransitionError,
    DeviceRole,
    NoKeysInRangeError,
    OutsideCurrentDayError,
    PassiveListenError,
    ReceiptCodeError,
    RoleError,
    advance_day,
    check_receipt_code,
    current_broadcast,
    decode_receipt_code,
    encode_receipt_code,
    device_new,
    exposure_timeline,
    make_receipt_code,
    make_risk_report,
    publish_keys,
    record_observation,
    report_from_json,
    report_to_json,
    self_check,
)
from encommons.protocol import (  # noqa: E402
    INTERVALS_PER_DAY,
    DiagnosisKey,
    ExposurePolicy,
    ReportType,
    derive_rpi,
)


def _ota(first: int, last: int) -> OneTimeAuthorization:
    return OneTimeAuthorization(
        token=b"\x01" * 16,
        issuer="pha-1",
        report_type=ReportType.CONFIRMED,
        authorized_days=(first, last),
        expiry=10_000,
    )


def _days(device, rng, n: int):
    for d in range(1, n + 1):
        device = advance_day(device, rng, d * INTERVALS_PER_DAY)
    return device


def test_device_new_keys_the_current_day() -> None:
    rng = np.random.default_rng(0)
    phone = device_new(DeviceRole.PHONE, rng, 150)
    assert phone.current_tek.day_start == 96
    assert phone.tek_history == ()
    assert current_broadcast(phone, 150) == derive_rpi(phone.current_tek, 150)
    with pytest.raises(OutsideCurrentDayError):
        current_broadcast(phone, 200)


def test_advance_day_rotates_and_enforces_retention() -> None:
    """History never exceeds the retention window."""
    rng = np.random.default_rng(1)
    phone = device_new(DeviceRole.PHONE, rng, 0, retention_days=3)
    first = phone.current_tek
    phone = advance_day(phone, rng, 96)
    assert phone.tek_history == (first,)
    assert phone.current_tek != first

    phone = _days(phone, rng, 6)
    assert len(phone.tek_history) <= 3
    assert all(k.day_start >= 6 * 96 - 3 * 96 for k in phone.tek_history)

    with pytest.raises(DayTransitionError):
        advance_day(phone, rng, 6 * 96)
    with pytest.raises(DayTransitionError):
        advance_day(phone, rng, 7 * 96 + 1)


def test_observations_age_out_with_retention() -> None:
    rng = np.random.default_rng(2)
    other = device_new(DeviceRole.PHONE, rng, 0)
    phone = device_new(DeviceRole.PHONE, rng, 0, retention_days=2)
    phone = record_observation(phone, current_broadcast(other, 10), 10, 50.0, 900.0)
    assert len(phone.observation_log) == 1
    phone = advance_day(phone, rng, 96)
    assert len(phone.observation_log) == 1
    phone = advance_day(phone, rng, 192)
    assert len(phone.observation_log) == 1
    phone = advance_day(phone, rng, 288)
    assert phone.observation_log == ()


def test_passive_lighthouse_cannot_listen() -> None:
    rng = np.random.default_rng(3)
    beacon = device_new(DeviceRole.LIGHTHOUSE_PASSIVE, rng, 0, place_label="bus")
    phone = device_new(DeviceRole.PHONE, rng, 0)
    with pytest.raises(PassiveListenError):
        record_observation(beacon, current_broadcast(phone, 5), 5, 40.0, 900.0)
    with pytest.raises(RoleError):
        device_new(DeviceRole.PHONE, rng, 0, place_label="home")


def test_self_check_finds_own_contacts() -> None:
    rng = np.random.default_rng(4)
    a = device_new(DeviceRole.PHONE, rng, 0)
    b = device_new(DeviceRole.PHONE, rng, 0)
    for t in (40, 41):
        b = record_observation(b, current_broadcast(a, t), t, 50.0, 900.0)

    risk, matches = self_check(b, [DiagnosisKey(a.current_tek)], ExposurePolicy())
    assert float(risk) == pytest.approx(1800.0)
    assert matches[0].matched_intervals == (40, 41)

    risk, matches = self_check(b, [DiagnosisKey(b.current_tek)], ExposurePolicy())
    assert matches == []
    assert float(risk) == 0.0


def test_publish_keys_within_authorization() -> None:
    rng = np.random.default_rng(5)
    phone = _days(device_new(DeviceRole.PHONE, rng, 0), rng, 4)

    keys = publish_keys(phone, (96, 288), _ota(0, 384))
    assert [k.day_start for k in keys] == [96, 192, 288]

    with pytest.raises(AuthorizationRangeError):
        publish_keys(phone, (0, 384), _ota(96, 384))
    with pytest.raises(AuthorizationRangeError):
        publish_keys(phone, (192, 96), _ota(0, 384))
    with pytest.raises(NoKeysInRangeError):
        publish_keys(phone, (960, 1056), _ota(0, 2000))


def test_lighthouse_risk_report_is_aggregate() -> None:
    """Only per-day counts and risk leave the lighthouse."""
    rng = np.random.default_rng(6)
    visitor = device_new(DeviceRole.PHONE, rng, 0)
    shop = device_new(DeviceRole.LIGHTHOUSE_ACTIVE, rng, 0, place_label="corner shop")
    for t in (36, 37, 38):
        shop = record_observation(shop, current_broadcast(visitor, t), t, 45.0, 900.0)

    keys = [DiagnosisKey(visitor.current_tek, pha_id="pha-1")]
    report = make_risk_report(shop, keys, ExposurePolicy(), "lh-7")

    assert report.exposed_days == [0]
    assert report.per_day[0].match_count == 1
    assert report.total_risk == pytest.approx(2700.0)
    text = report_to_json(report)
    assert "corner shop" not in text
    assert visitor.current_tek.hex not in text
    assert report_from_json(text) == report

    timeline = exposure_timeline(shop, keys, ExposurePolicy())
    assert len(timeline) == INTERVALS_PER_DAY
    assert timeline.loc[36] == 1
    assert int(timeline.sum()) == 3


def test_risk_report_requires_active_lighthouse() -> None:
    rng = np.random.default_rng(7)
    for role in (DeviceRole.PHONE, DeviceRole.LIGHTHOUSE_PASSIVE):
        with pytest.raises(RoleError):
            make_risk_report(device_new(role, rng, 0), [], ExposurePolicy(), "x")


def test_receipt_code_checks_against_published_keys() -> None:
    rng = np.random.default_rng(8)
    bus = device_new(DeviceRole.LIGHTHOUSE_PASSIVE, rng, 96)
    code = make_receipt_code(bus, 130)

    prefix, interval = decode_receipt_code(code)
    assert interval == 130
    assert prefix == derive_rpi(bus.current_tek, 130).value[:10]

    assert check_receipt_code(code, [DiagnosisKey(bus.current_tek)])
    assert check_receipt_code(str(code).lower(), [DiagnosisKey(bus.current_tek)])
    other = device_new(DeviceRole.LIGHTHOUSE_PASSIVE, rng, 96)
    assert not check_receipt_code(code, [DiagnosisKey(other.current_tek)])


def test_receipt_code_errors() -> None:
    rng = np.random.default_rng(9)
    with pytest.raises(RoleError):
        make_receipt_code(device_new(DeviceRole.PHONE, rng, 0), 5)
    with pytest.raises(ReceiptCodeError):
        decode_receipt_code("not base32!")
    with pytest.raises(ReceiptCodeError):
        decode_receipt_code("AAAA")


def test_receipt_codes_find_every_constructed_hit() -> None:
    rng = np.random.default_rng(10)
    for k in range(1000):
        t = 96 + k % 96
        lighthouse = device_new(DeviceRole.LIGHTHOUSE_PASSIVE, rng, t)
        code = make_receipt_code(lighthouse, t)
        assert check_receipt_code(code, [DiagnosisKey(lighthouse.current_tek)])


@pytest.mark.slow
def test_receipt_codes_rarely_false_positive() -> None:
    """A million random code/key pairs give at most one false hit."""
    rng = np.random.default_rng(11)
    keys = [DiagnosisKey(device_new(DeviceRole.PHONE, rng, 0).current_tek) for _ in range(1000)]
    hits = 0
    for _ in range(1000):
        code = encode_receipt_code(bytes(rng.bytes(10)), int(rng.integers(0, 96)))
        hits += check_receipt_code(code, keys)
    assert hits <= 1
