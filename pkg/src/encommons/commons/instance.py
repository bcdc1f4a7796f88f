"""encommons.commons.instance

One Commons instance: PHA registry, OTA lifecycle, key uploads, scoped
downloads, and push/pull federation with peer instances.

All state transitions (registration, issuance, upload, replication appends,
subscription cursors) go through one writer lock. Downloads read an immutable
prefix of the append-only store and never take the lock.
"""

from __future__ import annotations

import threading
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Protocol

from encommons.logs import get_logger
from encommons.protocol.intervals import (
    INTERVALS_PER_DAY,
    interval_from_timestamp,
    is_day_aligned,
)
from encommons.protocol.keys import EntropySource, SystemEntropy, TemporaryExposureKey
from encommons.protocol.matching import DiagnosisKey, ReportType

from .auth import ADMIN_SIGNER, Credential, Signer, verify_credential
from .errors import (
    AuthenticationError,
    CommonsError,
    RangeViolationError,
    TokenExpiredError,
    TokenUsedError,
    TransportError,
    UnknownTokenError,
)
from .models import (
    DownloadFilter,
    KeyStoreRecord,
    OneTimeAuthorization,
    PHARecord,
    Subscription,
    UploadReceipt,
    UploadState,
    UploadStatus,
    filter_from_dict,
    filter_to_dict,
    ota_from_dict,
    ota_to_dict,
    record_from_dict,
    record_to_dict,
)
from .store import Journal, KeyStore

logger = get_logger(__name__)

Clock = Callable[[], int]
Auth = Credential | Signer

TOKEN_LENGTH = 16
PULL_PAGE_SIZE = 500


class Peer(Protocol):
    """What an instance needs from a federated remote (in-process or over HTTP)."""

    def receive_forwarded(self, sender: str, records: Sequence[KeyStoreRecord]) -> int: ...

    def download_records(
        self, flt: DownloadFilter | None = None, cursor: int = 0, limit: int | None = None
    ) -> tuple[list[KeyStoreRecord], int]: ...


def wall_clock() -> int:
    return interval_from_timestamp(int(time.time()))


"""
=== request parameters ===

Client and server sign/verify the same dicts, so both build them here.
"""


def register_params(record: PHARecord) -> dict[str, Any]:
    return {
        "pha_id": record.pha_id,
        "public_key": record.public_key.hex(),
        "display_name": record.display_name,
        "region_tags": sorted(record.region_tags),
    }


def issue_params(
    report_type: ReportType | str,
    authorized_days: tuple[int, int],
    forward_tags: Iterable[str] = (),
    region_tags: Iterable[str] = (),
    ttl_days: int = 1,
    commons_forwarding: bool = True,
) -> dict[str, Any]:
    return {
        "report_type": ReportType.parse(report_type).value,
        "authorized_days": [int(authorized_days[0]), int(authorized_days[1])],
        "forward_tags": sorted(forward_tags),
        "region_tags": sorted(region_tags),
        "ttl_days": int(ttl_days),
        "commons_forwarding": bool(commons_forwarding),
    }


def status_params(token: bytes) -> dict[str, Any]:
    return {"token": token.hex()}


def _credential(auth: Auth, method: str, params: dict[str, Any]) -> Credential:
    if isinstance(auth, Signer):
        return auth.sign(method, params)
    return auth


@dataclass
class _Outbound:
    remote_instance: str
    records: tuple[KeyStoreRecord, ...]
    attempts: int = 1


@dataclass
class CommonsInstance:
    """A Commons instance.

    Parameters
    ----------
    instance_id:
        Identifier used in provenance and forwarding tags.
    admin_public_key:
        Raw Ed25519 key that authenticates PHA registrations.
    journal_path:
        Optional JSON-lines journal; an existing journal is replayed on open.
    clock:
        Returns the current interval number. Defaults to the wall clock.
    entropy:
        Source of OTA tokens.
    """

    instance_id: str
    admin_public_key: bytes
    journal_path: Path | None = None
    clock: Clock = wall_clock
    entropy: EntropySource = field(default_factory=SystemEntropy)

    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)
    _phas: dict[str, PHARecord] = field(default_factory=dict, repr=False)
    _otas: dict[bytes, OneTimeAuthorization] = field(default_factory=dict, repr=False)
    _fulfilled: dict[bytes, int] = field(default_factory=dict, repr=False)
    _store: KeyStore = field(default_factory=KeyStore, repr=False)
    _peers: dict[str, Peer] = field(default_factory=dict, repr=False)
    _subscriptions: dict[str, Subscription] = field(default_factory=dict, repr=False)
    _outbox: list[_Outbound] = field(default_factory=list, repr=False)
    _journal: Journal | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.instance_id:
            raise ValueError("instance_id must be non-empty")
        if self.journal_path is not None:
            self.journal_path = Path(self.journal_path)
            existed = self.journal_path.exists()
            self._journal = Journal(self.journal_path)
            if existed:
                self._replay()

    @classmethod
    def create(
        cls,
        instance_id: str,
        admin_public_key: bytes,
        journal_path: str | Path | None = None,
        clock: Clock | None = None,
        entropy: EntropySource | None = None,
    ) -> CommonsInstance:
        return cls(
            instance_id=instance_id,
            admin_public_key=admin_public_key,
            journal_path=Path(journal_path) if journal_path is not None else None,
            clock=clock or wall_clock,
            entropy=entropy or SystemEntropy(),
        )

    # ---- journal ----

    def _log(self, event: str, payload: dict[str, Any]) -> None:
        if self._journal is not None:
            self._journal.append(event, payload)

    def _replay(self) -> None:
        assert self._journal is not None
        n = 0
        for ev in self._journal.replay():
            kind = ev["event"]
            if kind == "pha_registered":
                rec = PHARecord(
                    pha_id=ev["pha_id"],
                    public_key=bytes.fromhex(ev["public_key"]),
                    display_name=ev.get("display_name", ""),
                    region_tags=frozenset(ev.get("region_tags", ())),
                )
                self._phas[rec.pha_id] = rec
            elif kind == "ota_issued":
                ota = ota_from_dict(ev["ota"])
                self._otas[ota.token] = ota
            elif kind == "keys_appended":
                for d in ev["records"]:
                    self._store.restore(record_from_dict(d))
            elif kind == "ota_used":
                token = bytes.fromhex(ev["token"])
                self._otas[token] = replace(self._otas[token], used=True)
                self._fulfilled[token] = int(ev["received_at"])
            elif kind == "subscription":
                sub = Subscription(
                    subscription_id=ev["subscription_id"],
                    remote_instance=ev["remote_instance"],
                    filter=filter_from_dict(ev.get("filter")),
                    cursor=int(ev.get("cursor", 0)),
                )
                self._subscriptions[sub.subscription_id] = sub
            else:
                logger.warning(f"{self.instance_id}: skipping unknown journal event {kind!r}")
                continue
            n += 1
        logger.info(
            f"{self.instance_id}: replayed {n} journal events, {len(self._store)} records"
        )

    # ---- registry ----

    def register_pha(self, record: PHARecord, admin_credential: Auth) -> str:
        params = register_params(record)
        cred = _credential(admin_credential, "register_pha", params)
        if cred.signer_id != ADMIN_SIGNER:
            raise AuthenticationError(f"{cred.signer_id!r} is not the administrator")
        verify_credential(self.admin_public_key, "register_pha", params, cred)
        with self._lock:
            if record.pha_id in self._phas:
                raise AuthenticationError(f"pha_id {record.pha_id!r} already registered")
            self._log("pha_registered", params)
            self._phas[record.pha_id] = record
        logger.info(f"{self.instance_id}: registered PHA {record.pha_id}")
        return record.pha_id

    @property
    def phas(self) -> dict[str, PHARecord]:
        return dict(self._phas)

    def _authenticate(self, auth: Auth, method: str, params: dict[str, Any]) -> PHARecord:
        cred = _credential(auth, method, params)
        pha = self._phas.get(cred.signer_id)
        if pha is None:
            raise AuthenticationError(f"unknown PHA {cred.signer_id!r}")
        verify_credential(pha.public_key, method, params, cred)
        return pha

    # ---- OTA lifecycle ----

    def issue_ota(
        self,
        pha_auth: Auth,
        report_type: ReportType | str,
        authorized_days: tuple[int, int],
        forward_tags: Iterable[str] = (),
        region_tags: Iterable[str] = (),
        ttl_days: int = 1,
        commons_forwarding: bool = True,
    ) -> OneTimeAuthorization:
        params = issue_params(
            report_type, authorized_days, forward_tags, region_tags, ttl_days, commons_forwarding
        )
        pha = self._authenticate(pha_auth, "issue_ota", params)

        first, last = params["authorized_days"]
        if not (is_day_aligned(first) and is_day_aligned(last)) or first > last:
            raise RangeViolationError(f"malformed day range [{first}, {last}]")
        if params["ttl_days"] < 1:
            raise RangeViolationError(f"ttl_days must be >= 1, got {params['ttl_days']}")

        with self._lock:
            token = self.entropy.bytes(TOKEN_LENGTH)
            while token in self._otas:
                token = self.entropy.bytes(TOKEN_LENGTH)
            ota = OneTimeAuthorization(
                token=token,
                issuer=pha.pha_id,
                report_type=ReportType.parse(params["report_type"]),
                authorized_days=(first, last),
                expiry=self.clock() + params["ttl_days"] * INTERVALS_PER_DAY,
                forward_tags=frozenset(params["forward_tags"]),
                region_tags=frozenset(params["region_tags"]),
                commons_forwarding=params["commons_forwarding"],
            )
            self._log("ota_issued", {"ota": ota_to_dict(ota)})
            self._otas[token] = ota
        logger.info(
            f"{self.instance_id}: {pha.pha_id} issued {ota.report_type.value} OTA "
            f"for days [{first}, {last}]"
        )
        return ota

    def upload_keys(
        self, token: bytes, teks: Sequence[TemporaryExposureKey]
    ) -> UploadReceipt:
        """Store one record per TEK and consume the OTA, or reject the whole upload."""

        with self._lock:
            ota = self._otas.get(token)
            if ota is None:
                raise UnknownTokenError()
            if ota.used:
                raise TokenUsedError()
            now = self.clock()
            if now >= ota.expiry:
                raise TokenExpiredError()
            if not teks:
                raise RangeViolationError("upload contains no keys")
            outside = [k.day_start for k in teks if not ota.covers_day(k.day_start)]
            if outside:
                first, last = ota.authorized_days
                raise RangeViolationError(
                    f"{len(outside)} key(s) outside authorized days [{first}, {last}]"
                )

            records = [
                KeyStoreRecord(
                    diagnosis_key=DiagnosisKey(
                        tek=k,
                        report_type=ota.report_type,
                        pha_id=ota.issuer,
                        region_tags=ota.region_tags,
                        upload_time=now,
                        origin_instance=self.instance_id,
                    ),
                    ota_token=token,
                    received_at=now,
                    origin_instance=self.instance_id,
                )
                for k in teks
            ]
            stored = self._append(records)
            self._log("ota_used", {"token": token.hex(), "received_at": now})
            self._otas[token] = replace(ota, used=True)
            self._fulfilled[token] = now

        logger.info(
            f"{self.instance_id}: upload under {ota.issuer} OTA stored "
            f"{len(stored)}/{len(records)} keys"
        )

        forwarded: list[str] = []
        if ota.commons_forwarding:
            for remote in sorted(ota.forward_tags):
                if self._try_forward(remote, tuple(stored)):
                    forwarded.append(remote)
        return UploadReceipt(
            token_hex=token.hex(),
            accepted=len(stored),
            received_at=now,
            forwarded_to=tuple(forwarded),
        )

    def check_upload_status(self, pha_auth: Auth, token: bytes) -> UploadStatus:
        pha = self._authenticate(pha_auth, "check_upload_status", status_params(token))
        ota = self._otas.get(token)
        if ota is None:
            raise UnknownTokenError()
        if ota.issuer != pha.pha_id:
            raise AuthenticationError(f"{pha.pha_id!r} did not issue this OTA")
        received_at = self._fulfilled.get(token)
        if received_at is None:
            return UploadStatus(UploadState.PENDING)
        return UploadStatus(UploadState.FULFILLED, received_at)

    # ---- store ----

    def _append(self, records: Iterable[KeyStoreRecord]) -> list[KeyStoreRecord]:
        with self._lock:
            fresh: list[KeyStoreRecord] = []
            seen: set[tuple[bytes, int]] = set()
            for r in records:
                if self._store.contains(r) or r.dedup_key in seen:
                    continue
                seen.add(r.dedup_key)
                fresh.append(r)
            if not fresh:
                return []
            # journal first so a crash never leaves unjournaled records visible
            last = self._store.last_seq
            numbered = [replace(r, seq=last + i) for i, r in enumerate(fresh, start=1)]
            self._log("keys_appended", {"records": [record_to_dict(r) for r in numbered]})
            stored = self._store.append(fresh)
        return stored

    def records(self) -> tuple[KeyStoreRecord, ...]:
        return self._store.snapshot()

    def download_records(
        self, flt: DownloadFilter | None = None, cursor: int = 0, limit: int | None = None
    ) -> tuple[list[KeyStoreRecord], int]:
        batch = self._store.scan(flt or DownloadFilter(), cursor, limit)
        next_cursor = batch[-1].seq if batch else cursor
        return batch, next_cursor

    def download_keys(
        self, flt: DownloadFilter | None = None, cursor: int = 0, limit: int | None = None
    ) -> tuple[list[DiagnosisKey], int]:
        """Public, unauthenticated. Records past ``cursor`` matching ``flt``, in store order."""

        batch, next_cursor = self.download_records(flt, cursor, limit)
        return [r.diagnosis_key for r in batch], next_cursor

    # ---- federation ----

    def add_peer(self, instance_id: str, peer: Peer) -> None:
        if instance_id == self.instance_id:
            raise ValueError("an instance cannot peer with itself")
        with self._lock:
            self._peers[instance_id] = peer
        logger.info(f"{self.instance_id}: peer {instance_id} added")

    @property
    def peers(self) -> list[str]:
        return sorted(self._peers)

    def _peer(self, remote_instance: str) -> Peer:
        peer = self._peers.get(remote_instance)
        if peer is None:
            raise TransportError(f"no route to instance {remote_instance!r}")
        return peer

    def forward_keys(self, remote_instance: str, records: Sequence[KeyStoreRecord]) -> int:
        """Push records to a peer; returns how many the peer had not seen."""

        accepted = self._peer(remote_instance).receive_forwarded(self.instance_id, records)
        logger.info(
            f"{self.instance_id}: forwarded {len(records)} records to {remote_instance}, "
            f"{accepted} accepted"
        )
        return accepted

    def _try_forward(self, remote_instance: str, records: tuple[KeyStoreRecord, ...]) -> bool:
        try:
            self.forward_keys(remote_instance, records)
        except CommonsError as e:
            logger.warning(f"{self.instance_id}: forward to {remote_instance} failed: {e}")
            with self._lock:
                self._outbox.append(_Outbound(remote_instance, records))
            return False
        return True

    def receive_forwarded(self, sender: str, records: Sequence[KeyStoreRecord]) -> int:
        if sender not in self._peers:
            raise AuthenticationError(f"{sender!r} is not a registered peer")
        now = self.clock()
        stored = self._append(
            KeyStoreRecord(
                diagnosis_key=r.diagnosis_key,
                ota_token=r.ota_token,
                received_at=now,
                origin_instance=r.origin_instance,
            )
            for r in records
        )
        return len(stored)

    def pending_forwards(self) -> int:
        return len(self._outbox)

    def retry_forwards(self) -> int:
        """Re-attempt failed forwards; returns the number of records the peers accepted."""

        with self._lock:
            queue, self._outbox = self._outbox, []
        total = 0
        for item in queue:
            try:
                total += self.forward_keys(item.remote_instance, item.records)
            except CommonsError as e:
                logger.warning(
                    f"{self.instance_id}: retry {item.attempts} to {item.remote_instance} "
                    f"failed: {e}"
                )
                with self._lock:
                    self._outbox.append(replace(item, attempts=item.attempts + 1))
        return total

    def subscribe(
        self, remote_instance: str, flt: DownloadFilter | None = None
    ) -> Subscription:
        self._peer(remote_instance)
        with self._lock:
            sub = Subscription(
                subscription_id=f"{remote_instance}#{len(self._subscriptions) + 1}",
                remote_instance=remote_instance,
                filter=flt or DownloadFilter(),
            )
            self._save_subscription(sub)
        return sub

    def _save_subscription(self, sub: Subscription) -> None:
        self._log(
            "subscription",
            {
                "subscription_id": sub.subscription_id,
                "remote_instance": sub.remote_instance,
                "filter": filter_to_dict(sub.filter),
                "cursor": sub.cursor,
            },
        )
        self._subscriptions[sub.subscription_id] = sub

    @property
    def subscriptions(self) -> list[Subscription]:
        return list(self._subscriptions.values())

    def run_subscription(self, subscription: Subscription | str) -> int:
        """Pull everything past the cursor, append unseen records, advance the cursor.

        A transport failure raises before anything is appended.
        """

        sub_id = (
            subscription.subscription_id
            if isinstance(subscription, Subscription)
            else subscription
        )
        sub = self._subscriptions.get(sub_id)
        if sub is None:
            raise KeyError(f"unknown subscription {sub_id!r}")
        peer = self._peer(sub.remote_instance)

        pulled: list[KeyStoreRecord] = []
        cursor = sub.cursor
        while True:
            batch, next_cursor = peer.download_records(sub.filter, cursor, PULL_PAGE_SIZE)
            if not batch:
                break
            pulled.extend(batch)
            cursor = next_cursor

        now = self.clock()
        with self._lock:
            stored = self._append(
                KeyStoreRecord(
                    diagnosis_key=r.diagnosis_key,
                    ota_token=r.ota_token,
                    received_at=now,
                    origin_instance=r.origin_instance,
                )
                for r in pulled
            )
            current = self._subscriptions[sub_id]
            if cursor > current.cursor:
                self._save_subscription(replace(current, cursor=cursor))
        logger.info(
            f"{self.instance_id}: pulled {len(pulled)} records from {sub.remote_instance}, "
            f"{len(stored)} new"
        )
        return len(stored)

    # ---- inspection ----

    def state_dict(self) -> dict[str, Any]:
        """Everything the instance holds, in JSON-ready form."""

        return {
            "instance_id": self.instance_id,
            "phas": [register_params(p) for p in self._phas.values()],
            "otas": [ota_to_dict(o) for o in self._otas.values()],
            "records": [record_to_dict(r) for r in self.records()],
        }
