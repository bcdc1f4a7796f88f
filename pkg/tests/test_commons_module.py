import sys
import threading
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from encommons.commons import (  # noqa: E402
    ADMIN_SIGNER,
    AuthenticationError,
    CommonsInstance,
    DownloadFilter,
    ExportFormatError,
    PHARecord,
    RangeViolationError,
    StatusCode,
    TokenExpiredError,
    TokenUsedError,
    TransportError,
    UnknownTokenError,
    UploadState,
    assert_closed_schema,
    error_for_status,
    export_keys,
    read_export,
)
from encommons.commons.auth import Signer  # noqa: E402
from encommons.protocol import ReportType, TemporaryExposureKey, generate_tek  # noqa: E402


class Clock:
    def __init__(self, now: int = 0) -> None:
        self.now = now

    def __call__(self) -> int:
        return self.now


def _instance(instance_id: str = "A", clock: Clock | None = None, journal=None, seed: int = 0):
    admin = Signer(ADMIN_SIGNER)
    inst = CommonsInstance.create(
        instance_id,
        admin.public_key,
        journal_path=journal,
        clock=clock or Clock(),
        entropy=np.random.default_rng(seed),
    )
    return inst, admin


def _with_pha(inst: CommonsInstance, admin: Signer, pha_id: str = "pha-1", regions=()) -> Signer:
    pha = Signer(pha_id)
    inst.register_pha(PHARecord(pha_id, pha.public_key, region_tags=frozenset(regions)), admin)
    return pha


def _teks(seed: int, days=(0, 96)):
    rng = np.random.default_rng(seed)
    return [generate_tek(rng, d) for d in days]


def test_register_pha_requires_admin_signature() -> None:
    inst, admin = _instance()
    pha = Signer("pha-1")
    record = PHARecord("pha-1", pha.public_key)

    with pytest.raises(AuthenticationError):
        inst.register_pha(record, pha)
    with pytest.raises(AuthenticationError):
        inst.register_pha(record, Signer(ADMIN_SIGNER))

    assert inst.register_pha(record, admin) == "pha-1"
    assert "pha-1" in inst.phas
    with pytest.raises(AuthenticationError):
        inst.register_pha(record, admin)


def test_issue_ota_validation() -> None:
    inst, admin = _instance()
    pha = _with_pha(inst, admin)

    with pytest.raises(AuthenticationError):
        inst.issue_ota(Signer("pha-1"), "confirmed", (0, 96))
    with pytest.raises(AuthenticationError):
        inst.issue_ota(Signer("stranger"), "confirmed", (0, 96))
    with pytest.raises(RangeViolationError):
        inst.issue_ota(pha, "confirmed", (0, 100))
    with pytest.raises(RangeViolationError):
        inst.issue_ota(pha, "confirmed", (96, 0))
    with pytest.raises(RangeViolationError):
        inst.issue_ota(pha, "confirmed", (0, 96), ttl_days=0)

    ota = inst.issue_ota(pha, "probable", (0, 96), ttl_days=2)
    assert len(ota.token) == 16
    assert ota.issuer == "pha-1"
    assert ota.report_type is ReportType.PROBABLE
    assert ota.expiry == 192
    assert not ota.used


def test_upload_consumes_token_once() -> None:
    clock = Clock(10)
    inst, admin = _instance(clock=clock)
    pha = _with_pha(inst, admin, regions=("north",))
    ota = inst.issue_ota(pha, "confirmed", (0, 96), region_tags=["north"])

    assert inst.check_upload_status(pha, ota.token).state is UploadState.PENDING

    clock.now = 20
    receipt = inst.upload_keys(ota.token, _teks(1))
    assert receipt.accepted == 2
    assert receipt.received_at == 20

    status = inst.check_upload_status(pha, ota.token)
    assert status.state is UploadState.FULFILLED
    assert status.received_at == 20

    with pytest.raises(TokenUsedError):
        inst.upload_keys(ota.token, _teks(2))
    with pytest.raises(UnknownTokenError):
        inst.upload_keys(b"\x00" * 16, _teks(3))

    rec = inst.records()[0]
    assert rec.diagnosis_key.pha_id == "pha-1"
    assert rec.diagnosis_key.region_tags == frozenset({"north"})
    assert rec.origin_instance == "A"
    assert [r.seq for r in inst.records()] == [1, 2]


def test_rejected_upload_leaves_token_unused() -> None:
    """Range violations and empty uploads do not consume the authorization."""
    inst, admin = _instance()
    pha = _with_pha(inst, admin)
    ota = inst.issue_ota(pha, "confirmed", (96, 96))

    with pytest.raises(RangeViolationError):
        inst.upload_keys(ota.token, _teks(4, days=(0, 96)))
    with pytest.raises(RangeViolationError):
        inst.upload_keys(ota.token, [])
    assert inst.records() == ()

    assert inst.upload_keys(ota.token, _teks(4, days=(96,))).accepted == 1


def test_expired_token_is_rejected() -> None:
    clock = Clock(0)
    inst, admin = _instance(clock=clock)
    pha = _with_pha(inst, admin)
    ota = inst.issue_ota(pha, "confirmed", (0, 0), ttl_days=1)
    clock.now = 96
    with pytest.raises(TokenExpiredError):
        inst.upload_keys(ota.token, _teks(5, days=(0,)))


def test_status_only_for_the_issuing_pha() -> None:
    inst, admin = _instance()
    pha1 = _with_pha(inst, admin, "pha-1")
    pha2 = _with_pha(inst, admin, "pha-2")
    ota = inst.issue_ota(pha1, "confirmed", (0, 0))
    with pytest.raises(AuthenticationError):
        inst.check_upload_status(pha2, ota.token)
    with pytest.raises(UnknownTokenError):
        inst.check_upload_status(pha1, b"\x02" * 16)


def test_concurrent_uploads_on_one_token() -> None:
    """Exactly one of many racing uploads wins; the rest see the token used."""
    inst, admin = _instance()
    pha = _with_pha(inst, admin)
    ota = inst.issue_ota(pha, "confirmed", (0, 96))

    wins: list[int] = []
    used: list[int] = []
    barrier = threading.Barrier(100)

    def worker(i: int) -> None:
        teks = _teks(100 + i)
        barrier.wait()
        try:
            inst.upload_keys(ota.token, teks)
            wins.append(i)
        except TokenUsedError:
            used.append(i)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(100)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert len(wins) == 1
    assert len(used) == 99
    assert len(inst.records()) == 2


def test_duplicate_keys_are_stored_once() -> None:
    inst, admin = _instance()
    pha = _with_pha(inst, admin)
    teks = _teks(6)
    first = inst.issue_ota(pha, "confirmed", (0, 96))
    second = inst.issue_ota(pha, "confirmed", (0, 96))
    assert inst.upload_keys(first.token, teks).accepted == 2
    assert inst.upload_keys(second.token, teks + teks).accepted == 0
    assert len(inst.records()) == 2


def test_download_filters_and_cursor_pagination() -> None:
    clock = Clock(0)
    inst, admin = _instance(clock=clock)
    pha1 = _with_pha(inst, admin, "pha-1")
    pha2 = _with_pha(inst, admin, "pha-2")
    inst.upload_keys(inst.issue_ota(pha1, "confirmed", (0, 96)).token, _teks(7))
    clock.now = 50
    inst.upload_keys(inst.issue_ota(pha2, "probable", (0, 96)).token, _teks(8))

    keys, cursor = inst.download_keys()
    assert len(keys) == 4
    assert cursor == 4

    page, cursor = inst.download_keys(limit=3)
    assert (len(page), cursor) == (3, 3)
    page, cursor = inst.download_keys(cursor=cursor, limit=3)
    assert (len(page), cursor) == (1, 4)
    page, cursor = inst.download_keys(cursor=cursor)
    assert (page, cursor) == ([], 4)

    only2, _ = inst.download_keys(DownloadFilter(pha_ids=frozenset({"pha-2"})))
    assert {k.pha_id for k in only2} == {"pha-2"}
    probable, _ = inst.download_keys(
        DownloadFilter(report_types=frozenset({ReportType.PROBABLE}))
    )
    assert len(probable) == 2
    recent, _ = inst.download_keys(DownloadFilter(since=50))
    assert len(recent) == 2


def _pair():
    a, admin = _instance("A", seed=1)
    b, _ = _instance("B", seed=2)
    a.add_peer("B", b)
    b.add_peer("A", a)
    return a, b, _with_pha(a, admin)


def test_upload_forwards_to_tagged_peers() -> None:
    a, b, pha = _pair()
    ota = a.issue_ota(pha, "confirmed", (0, 96), forward_tags=["B"])
    receipt = a.upload_keys(ota.token, _teks(9))

    assert receipt.forwarded_to == ("B",)
    assert len(b.records()) == 2
    assert {r.origin_instance for r in b.records()} == {"A"}
    assert {r.diagnosis_key.pha_id for r in b.records()} == {"pha-1"}

    assert a.forward_keys("B", a.records()) == 0
    assert len(b.records()) == 2


def test_forwarding_can_be_disabled_per_authorization() -> None:
    a, b, pha = _pair()
    ota = a.issue_ota(pha, "confirmed", (0, 96), forward_tags=["B"], commons_forwarding=False)
    assert a.upload_keys(ota.token, _teks(10)).forwarded_to == ()
    assert b.records() == ()


def test_forward_requires_registered_peer() -> None:
    a, b, pha = _pair()
    c, _ = _instance("C")
    a.upload_keys(a.issue_ota(pha, "confirmed", (0, 96)).token, _teks(11))
    with pytest.raises(AuthenticationError):
        c.receive_forwarded("A", a.records())
    with pytest.raises(TransportError):
        a.forward_keys("C", a.records())


def test_failed_forward_is_queued_and_retried() -> None:
    a, b, pha = _pair()
    ota = a.issue_ota(pha, "confirmed", (0, 96), forward_tags=["C"])
    receipt = a.upload_keys(ota.token, _teks(12))
    assert receipt.accepted == 2
    assert receipt.forwarded_to == ()
    assert a.pending_forwards() == 1

    assert a.retry_forwards() == 0
    assert a.pending_forwards() == 1

    c, _ = _instance("C")
    c.add_peer("A", a)
    a.add_peer("C", c)
    assert a.retry_forwards() == 2
    assert a.pending_forwards() == 0
    assert len(c.records()) == 2


def test_pull_subscription_advances_cursor() -> None:
    a, b, pha = _pair()
    c, _ = _instance("C")
    c.add_peer("A", a)
    a.upload_keys(a.issue_ota(pha, "confirmed", (0, 96)).token, _teks(13))

    sub = c.subscribe("A", DownloadFilter(pha_ids=frozenset({"pha-1"})))
    assert c.run_subscription(sub) == 2
    assert c.subscriptions[0].cursor == 2
    assert c.run_subscription(sub.subscription_id) == 0

    a.upload_keys(a.issue_ota(pha, "confirmed", (0, 96)).token, _teks(14))
    assert c.run_subscription(sub) == 2
    assert len(c.records()) == 4
    assert {r.origin_instance for r in c.records()} == {"A"}

    with pytest.raises(TransportError):
        c.subscribe("Z")
    with pytest.raises(KeyError):
        c.run_subscription("A#99")


def test_push_and_pull_do_not_duplicate() -> None:
    a, b, pha = _pair()
    b_sub = b.subscribe("A")
    ota = a.issue_ota(pha, "confirmed", (0, 96), forward_tags=["B"])
    a.upload_keys(ota.token, _teks(15))
    assert b.run_subscription(b_sub) == 0
    assert len(b.records()) == 2


def test_journal_replay_restores_state(tmp_path: Path) -> None:
    journal = tmp_path / "journal.jsonl"
    clock = Clock(5)
    a, admin = _instance("A", clock=clock, journal=journal)
    b, _ = _instance("B")
    a.add_peer("B", b)
    pha = _with_pha(a, admin)
    used = a.issue_ota(pha, "confirmed", (0, 96))
    pending = a.issue_ota(pha, "probable", (0, 96))
    a.upload_keys(used.token, _teks(16))
    a.subscribe("B")

    reopened = CommonsInstance.create("A", a.admin_public_key, journal_path=journal, clock=clock)
    assert reopened.records() == a.records()
    assert "pha-1" in reopened.phas
    assert [s.subscription_id for s in reopened.subscriptions] == ["B#1"]
    assert reopened.check_upload_status(pha, used.token).received_at == 5
    assert reopened.check_upload_status(pha, pending.token).state is UploadState.PENDING
    with pytest.raises(TokenUsedError):
        reopened.upload_keys(used.token, _teks(17))
    assert reopened.upload_keys(pending.token, _teks(18)).accepted == 2
    assert [r.seq for r in reopened.records()] == [1, 2, 3, 4]


def test_state_holds_no_identity_or_location_fields() -> None:
    assert_closed_schema()
    inst, admin = _instance()
    pha = _with_pha(inst, admin)
    inst.upload_keys(inst.issue_ota(pha, "confirmed", (0, 0)).token, _teks(19, days=(0,)))
    record = inst.state_dict()["records"][0]
    assert set(record) == {"key", "ota_token", "received_at", "origin_instance", "seq"}


def test_error_for_status_rebuilds_error_classes() -> None:
    err = error_for_status(3, "already used")
    assert isinstance(err, TokenUsedError)
    assert err.status is StatusCode.TOKEN_USED
    assert str(err) == "already used"


def test_export_file(tmp_path: Path) -> None:
    inst, admin = _instance()
    pha = _with_pha(inst, admin, regions=("north", "east"))
    inst.upload_keys(
        inst.issue_ota(pha, "probable", (0, 96), region_tags=["north", "east"]).token, _teks(20)
    )
    path = export_keys(inst.records(), tmp_path / "keys.txt")
    assert path.read_text().splitlines()[0] == "en-commons-export v1"

    keys = read_export(path)
    assert [k.tek for k in keys] == [r.diagnosis_key.tek for r in inst.records()]
    assert keys[0].report_type is ReportType.PROBABLE
    assert keys[0].region_tags == frozenset({"north", "east"})
    assert keys[0].pha_id == "pha-1"

    bad = tmp_path / "bad.txt"
    bad.write_text("something else\n")
    with pytest.raises(ExportFormatError):
        read_export(bad)


def test_export_refuses_partial_day_keys(tmp_path: Path) -> None:
    inst, admin = _instance()
    pha = _with_pha(inst, admin)
    full = _teks(21, days=(0,))[0]
    partial = TemporaryExposureKey(_teks(22, days=(96,))[0].key_material, 96, rolling_period=48)
    inst.upload_keys(inst.issue_ota(pha, "confirmed", (0, 96)).token, [full, partial])

    path = tmp_path / "keys.txt"
    with pytest.raises(ExportFormatError, match="48 intervals"):
        export_keys(inst.records(), path)
    assert not path.exists()

    export_keys([r for r in inst.records() if r.diagnosis_key.tek == full], path)
    assert [k.tek for k in read_export(path)] == [full]


def test_many_two_way_races() -> None:
    """Across 100 races on fresh tokens the loser always sees status 3."""
    inst, admin = _instance()
    pha = _with_pha(inst, admin)
    rng = np.random.default_rng(99)

    for race in range(100):
        ota = inst.issue_ota(pha, "confirmed", (0, 96))
        payloads = [[generate_tek(rng, 0), generate_tek(rng, 96)] for _ in range(2)]
        outcomes: list[int] = []
        barrier = threading.Barrier(2)

        def worker(teks, token=ota.token, barrier=barrier, outcomes=outcomes) -> None:
            barrier.wait()
            try:
                inst.upload_keys(token, teks)
                outcomes.append(0)
            except TokenUsedError as e:
                outcomes.append(int(e.status))

        threads = [threading.Thread(target=worker, args=(p,)) for p in payloads]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(outcomes) == [0, 3], f"race {race}: {outcomes}"

    assert len(inst.records()) == 200


def test_three_instances_converge() -> None:
    """A pushes to B, C pulls from B; every transfer replayed changes nothing."""
    a, admin = _instance("A", seed=1)
    b, _ = _instance("B", seed=2)
    c, _ = _instance("C", seed=3)
    a.add_peer("B", b)
    b.add_peer("A", a)
    c.add_peer("B", b)
    pha = _with_pha(a, admin)

    for seed in (30, 31, 32):
        ota = a.issue_ota(pha, "confirmed", (0, 96), forward_tags=["B"])
        a.upload_keys(ota.token, _teks(seed))
    sub = c.subscribe("B")
    c.run_subscription(sub)

    def keyset(inst):
        return {(r.dedup_key, r.origin_instance, r.ota_token) for r in inst.records()}

    assert len(keyset(a)) == 6
    assert keyset(a) == keyset(b) == keyset(c)

    before = [inst.records() for inst in (a, b, c)]
    assert a.forward_keys("B", a.records()) == 0
    assert c.run_subscription(sub) == 0
    assert b.receive_forwarded("A", c.records()) == 0
    assert [inst.records() for inst in (a, b, c)] == before
