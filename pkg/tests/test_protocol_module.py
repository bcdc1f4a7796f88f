import hashlib
import hmac
import struct
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from encommons.protocol import (  # noqa: E402
    INTERVALS_PER_DAY,
    DiagnosisKey,
    ExposurePolicy,
    IntervalError,
    KeyScheduleError,
    ObservedBeacon,
    ProtocolFileError,
    ReportType,
    RollingProximityIdentifier,
    TemporaryExposureKey,
    UnalignedDayError,
    build_rpi_index,
    day_start_of,
    day_starts_between,
    derive_rpi,
    derive_rpi_sequence,
    filter_keys,
    generate_tek,
    golden_rows,
    interval_from_timestamp,
    match_exposures,
    read_observation_log,
    score_risk,
    verify_vectors,
    write_observation_log,
    write_vectors,
)


def _reference_rpi(key: bytes, interval: int) -> bytes:
    msg = b"EN-RPI" + struct.pack("<I", interval)
    return hmac.new(key, msg, hashlib.sha256).digest()[:16]


def _tek(seed: int = 0, day: int = 0) -> TemporaryExposureKey:
    return generate_tek(np.random.default_rng(seed), day)


def _beacons(tek: TemporaryExposureKey, intervals, att: float = 50.0, dur: float = 900.0):
    return [ObservedBeacon(derive_rpi(tek, i), i, att, dur) for i in intervals]


def test_interval_arithmetic() -> None:
    assert interval_from_timestamp(0) == 0
    assert interval_from_timestamp(899) == 0
    assert interval_from_timestamp(900) == 1
    assert day_start_of(191) == 96
    assert day_starts_between(0, 192) == [0, 96, 192]
    with pytest.raises(IntervalError):
        interval_from_timestamp(-1)
    with pytest.raises(UnalignedDayError):
        day_starts_between(0, 100)


def test_rpi_matches_reference_hmac() -> None:
    """RPI equals the first 16 bytes of HMAC-SHA256 over label and LE32 interval."""
    tek = _tek(1, 96 * 3)
    for i in (tek.day_start, tek.day_start + 17, tek.end - 1):
        assert derive_rpi(tek, i).value == _reference_rpi(tek.key_material, i)


def test_rpi_golden_vector() -> None:
    tek = TemporaryExposureKey(b"\x00" * 16, 0)
    assert derive_rpi(tek, 0).hex == "e8c20c6f41b4fcb2b8066d4b2c2d6d65"
    assert verify_vectors(ROOT / "tests" / "data" / "rpi_vectors.csv") == []


def test_rpi_sequence_is_per_interval_and_distinct() -> None:
    tek = _tek(2, 96)
    seq = derive_rpi_sequence(tek)
    assert len(seq) == INTERVALS_PER_DAY
    assert seq[5] == derive_rpi(tek, 96 + 5)
    assert len({r.value for r in seq}) == INTERVALS_PER_DAY


def test_derive_rpi_rejects_interval_outside_key_period() -> None:
    tek = _tek(0, 96)
    with pytest.raises(KeyScheduleError):
        derive_rpi(tek, 95)
    with pytest.raises(KeyScheduleError):
        derive_rpi(tek, 192)


def test_key_validation() -> None:
    with pytest.raises(KeyScheduleError):
        TemporaryExposureKey(b"\x00" * 15, 0)
    with pytest.raises(KeyScheduleError):
        TemporaryExposureKey(b"\x00" * 16, 5)
    with pytest.raises(KeyScheduleError):
        TemporaryExposureKey.from_hex("zz" * 16, 0)
    with pytest.raises(KeyScheduleError):
        generate_tek(np.random.default_rng(0), 1)
    with pytest.raises(KeyScheduleError):
        RollingProximityIdentifier(b"\x01" * 8)


def test_generate_tek_is_deterministic_for_seeded_entropy() -> None:
    assert _tek(5).key_material == _tek(5).key_material
    assert _tek(5).key_material != _tek(6).key_material


def test_match_sums_duration_and_tracks_min_attenuation() -> None:
    tek = _tek(3)
    key = DiagnosisKey(tek, pha_id="pha-a")
    log = _beacons(tek, [10, 11], att=55.0, dur=200.0)
    log.append(ObservedBeacon(derive_rpi(tek, 12), 12, 40.0, 100.0))
    policy = ExposurePolicy(max_attenuation_db=60.0, min_total_duration_s=300.0)

    matches = match_exposures([key], log, policy)

    assert len(matches) == 1
    m = matches[0]
    assert m.matched_intervals == (10, 11, 12)
    assert m.total_duration_s == pytest.approx(500.0)
    assert m.min_attenuation_db == pytest.approx(40.0)
    assert float(score_risk(matches, policy)) == pytest.approx(500.0)


def test_match_ignores_rpi_seen_at_a_different_interval() -> None:
    """A replayed identifier heard in another interval does not match."""
    tek = _tek(4)
    rpi = derive_rpi(tek, 20)
    log = [ObservedBeacon(rpi, 21, 30.0, 900.0)]
    assert match_exposures([DiagnosisKey(tek)], log, ExposurePolicy()) == []


def test_match_respects_attenuation_and_duration_thresholds() -> None:
    tek = _tek(5)
    keys = [DiagnosisKey(tek)]
    policy = ExposurePolicy(max_attenuation_db=50.0, min_total_duration_s=600.0)

    assert match_exposures(keys, _beacons(tek, [1, 2], att=70.0), policy) == []
    assert match_exposures(keys, _beacons(tek, [1], att=40.0, dur=300.0), policy) == []
    assert len(match_exposures(keys, _beacons(tek, [1, 2], att=40.0, dur=300.0), policy)) == 1


def test_zero_duration_never_matches() -> None:
    tek = _tek(6)
    policy = ExposurePolicy(min_total_duration_s=0.0)
    assert match_exposures([DiagnosisKey(tek)], _beacons(tek, [3], dur=0.0), policy) == []


def test_probable_keys_are_down_weighted() -> None:
    a, b = _tek(7), _tek(8)
    keys = [DiagnosisKey(a), DiagnosisKey(b, report_type=ReportType.PROBABLE)]
    log = _beacons(a, [1]) + _beacons(b, [2])
    policy = ExposurePolicy(weight_probable=0.5)
    matches = match_exposures(keys, log, policy)
    assert len(matches) == 2
    assert float(score_risk(matches, policy)) == pytest.approx(900.0 + 450.0)


def test_matches_are_sorted_by_day_pha_and_key() -> None:
    t1, t2, t3 = _tek(9, 96), _tek(10, 0), _tek(11, 0)
    keys = [
        DiagnosisKey(t1, pha_id="a"),
        DiagnosisKey(t2, pha_id="b"),
        DiagnosisKey(t3, pha_id="a"),
    ]
    log = _beacons(t1, [100]) + _beacons(t2, [5]) + _beacons(t3, [6])
    order = [m.key.tek for m in match_exposures(keys, log, ExposurePolicy())]
    assert order == [t3, t2, t1]


def test_prebuilt_index_must_come_from_the_same_keys() -> None:
    t1, t2 = _tek(12), _tek(13)
    index = build_rpi_index([DiagnosisKey(t1)])
    assert len(index) == INTERVALS_PER_DAY
    same = match_exposures([DiagnosisKey(t1)], _beacons(t1, [7]), ExposurePolicy(), index=index)
    assert len(same) == 1
    with pytest.raises(ValueError):
        match_exposures(
            [DiagnosisKey(t1), DiagnosisKey(t2)], [], ExposurePolicy(), index=index
        )


def test_policy_validation_and_digest() -> None:
    with pytest.raises(ValueError):
        ExposurePolicy(weight_probable=2.0)
    with pytest.raises(ValueError):
        ExposurePolicy(min_total_duration_s=-1.0)
    assert ExposurePolicy().digest() == ExposurePolicy().digest()
    assert ExposurePolicy().digest() != ExposurePolicy(max_attenuation_db=50.0).digest()


def test_filter_keys_scopes_by_pha_region_and_type() -> None:
    keys = [
        DiagnosisKey(_tek(20), pha_id="a", region_tags=frozenset({"north"})),
        DiagnosisKey(_tek(21), pha_id="b", region_tags=frozenset({"south"})),
        DiagnosisKey(_tek(22), pha_id="a", report_type=ReportType.PROBABLE),
    ]
    assert len(filter_keys(keys)) == 3
    assert [k.pha_id for k in filter_keys(keys, pha_ids=["b"])] == ["b"]
    assert len(filter_keys(keys, region_tags=["north", "south"])) == 2
    assert len(filter_keys(keys, report_types=[ReportType.CONFIRMED])) == 2


def test_report_type_parse() -> None:
    assert ReportType.parse("Probable") is ReportType.PROBABLE
    with pytest.raises(ValueError):
        ReportType.parse("suspected")


def test_vector_file_write_and_verify(tmp_path: Path) -> None:
    """A vector file re-derives cleanly; a corrupted line is reported by number."""
    teks = [_tek(30, 0), _tek(31, 96)]
    path = write_vectors(golden_rows(teks), tmp_path / "vectors.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2 * INTERVALS_PER_DAY
    assert lines[0] == f"{teks[0].hex},0,0,{derive_rpi(teks[0], 0).hex}"
    assert verify_vectors(path) == []

    parts = lines[4].split(",")
    parts[3] = "00" * 16
    lines[4] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    bad = verify_vectors(path)
    assert [m.line for m in bad] == [5]


def test_observation_log_file(tmp_path: Path) -> None:
    tek = _tek(40)
    log = _beacons(tek, [3, 4], att=45.5, dur=120.0)
    path = write_observation_log(log, tmp_path / "obs.csv")
    assert path.read_text().splitlines()[0] == "rpi_hex,interval,attenuation_db,duration_s"
    assert read_observation_log(path) == log


@pytest.mark.parametrize(
    "row",
    [",100,40,900", "NA,100,40,900", f"{'ab' * 16},,40,900", f"{'ab' * 8},100,40,900"],
)
def test_observation_log_rejects_malformed_rows(tmp_path: Path, row: str) -> None:
    path = tmp_path / "obs.csv"
    path.write_text(f"rpi_hex,interval,attenuation_db,duration_s\n{row}\n")
    with pytest.raises(ProtocolFileError):
        read_observation_log(path)


def test_adding_a_qualifying_beacon_never_lowers_risk() -> None:
    rng = np.random.default_rng(31)
    policy = ExposurePolicy(max_attenuation_db=60.0, min_total_duration_s=600.0)
    keys = [
        DiagnosisKey(
            generate_tek(rng, 96 * (k % 2)),
            report_type=ReportType.PROBABLE if k % 3 == 0 else ReportType.CONFIRMED,
        )
        for k in range(8)
    ]
    log: list[ObservedBeacon] = []
    before, risk = set(), 0.0
    for _ in range(200):
        tek = keys[int(rng.integers(0, len(keys)))].tek
        i = tek.day_start + int(rng.integers(0, 96))
        log.append(
            ObservedBeacon(
                derive_rpi(tek, i), i, float(rng.uniform(30, 60)), float(rng.uniform(1, 400))
            )
        )
        matches = match_exposures(keys, log, policy)
        after = {m.key.sort_key() for m in matches}
        assert before <= after
        new_risk = float(score_risk(matches, policy))
        assert new_risk >= risk
        before, risk = after, new_risk


def test_scaling_weights_scales_risk_and_keeps_ranking() -> None:
    rng = np.random.default_rng(32)
    keys = [
        DiagnosisKey(
            generate_tek(rng, 0),
            report_type=ReportType.PROBABLE if k % 2 else ReportType.CONFIRMED,
        )
        for k in range(10)
    ]
    base = ExposurePolicy(weight_confirmed=1.0, weight_probable=0.5)
    tripled = ExposurePolicy(weight_confirmed=3.0, weight_probable=1.5)

    scores, scaled = [], []
    for _ in range(12):
        log = []
        for k in rng.choice(len(keys), size=int(rng.integers(1, 6)), replace=False):
            i = int(rng.integers(0, 96))
            dur = float(rng.integers(300, 1800))
            log.append(ObservedBeacon(derive_rpi(keys[k].tek, i), i, 50.0, dur))
        scores.append(float(score_risk(match_exposures(keys, log, base), base)))
        scaled.append(float(score_risk(match_exposures(keys, log, tripled), tripled)))

    assert scaled == pytest.approx([3 * s for s in scores])
    assert list(np.argsort(scaled, kind="stable")) == list(np.argsort(scores, kind="stable"))


def test_thousand_keys_give_distinct_identifiers() -> None:
    """96 identifiers per key, no collisions within or across keys, stable across runs."""
    rng = np.random.default_rng(2024)
    teks = [generate_tek(rng, 96 * (k % 7)) for k in range(1000)]
    first = [r.value for t in teks for r in derive_rpi_sequence(t)]
    assert len(first) == 96_000
    assert len(set(first)) == 96_000

    again = [r.value for t in teks for r in derive_rpi_sequence(t)]
    assert again == first


def _brute_force(keys, log, policy):
    """Nested-loop matcher: every beacon against every key's identifier at that interval."""
    schedules = [
        {i: _reference_rpi(k.tek.key_material, i) for i in range(k.tek.day_start, k.tek.end)}
        for k in keys
    ]
    found = {}
    for b in log:
        if b.attenuation_db > policy.max_attenuation_db:
            continue
        for pos, schedule in enumerate(schedules):
            if schedule.get(b.interval) != b.rpi.value:
                continue
            ivs, dur, att = found.get(pos, (set(), 0.0, float("inf")))
            found[pos] = (ivs | {b.interval}, dur + b.duration_s, min(att, b.attenuation_db))
    out = []
    for pos, (ivs, dur, att) in found.items():
        if dur > 0 and dur >= policy.min_total_duration_s:
            out.append((keys[pos].sort_key(), tuple(sorted(ivs)), dur, att))
    return sorted(out)


def _check_against_brute_force(rng: np.random.Generator, n_keys: int, n_beacons: int) -> None:
    keys = [
        DiagnosisKey(
            generate_tek(rng, 96 * int(rng.integers(0, 3))),
            report_type=ReportType.PROBABLE if rng.random() < 0.3 else ReportType.CONFIRMED,
            pha_id=f"pha-{int(rng.integers(0, 3))}",
        )
        for _ in range(n_keys)
    ]
    log = []
    for _ in range(n_beacons):
        i = int(rng.integers(0, 288))
        if rng.random() < 0.5:
            k = keys[int(rng.integers(0, n_keys))].tek
            j = k.day_start + int(rng.integers(0, 96))
            rpi = derive_rpi(k, j)
            i = j if rng.random() < 0.8 else i
        else:
            rpi = RollingProximityIdentifier(bytes(rng.bytes(16)))
        log.append(ObservedBeacon(rpi, i, float(rng.uniform(30, 80)), float(rng.uniform(0, 900))))
    policy = ExposurePolicy(
        max_attenuation_db=float(rng.uniform(40, 80)),
        min_total_duration_s=float(rng.uniform(0, 1500)),
    )

    got = sorted(
        (m.key.sort_key(), m.matched_intervals, m.total_duration_s, m.min_attenuation_db)
        for m in match_exposures(keys, log, policy)
    )
    want = _brute_force(keys, log, policy)
    assert len(got) == len(want)
    for g, w in zip(got, want, strict=True):
        assert g[:2] == w[:2]
        assert g[2] == pytest.approx(w[2])
        assert g[3] == w[3]


def test_matcher_agrees_with_brute_force() -> None:
    rng = np.random.default_rng(77)
    for _ in range(100):
        _check_against_brute_force(rng, int(rng.integers(1, 20)), int(rng.integers(0, 300)))


@pytest.mark.slow
def test_matcher_agrees_with_brute_force_at_full_size() -> None:
    rng = np.random.default_rng(78)
    for _ in range(5):
        _check_against_brute_force(rng, 100, 10_000)
