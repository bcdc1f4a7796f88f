"""encommons.sim.world

Deterministic tick loop over a ``WorldConfig``.

One tick is one protocol interval. Per tick, in order:

1. at a day boundary: every device self-checks against the keys its home
   instance holds, then rotates its key;
2. co-present devices exchange identifiers (radio draws are made for every
   directed pair, participating or not, so runs at different participation
   levels share their randomness);
3. scheduled diagnoses run: the PHA issues an OTA to the person's phone and,
   after a recall draw per visited place, to that place's lighthouses.

A final check round runs after the last tick.

Random streams are derived from the seed by purpose (participation, radio,
interview, tokens, credentials, one per device), so adding a device or a
draw in one stream never shifts another.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from encommons.commons.auth import ADMIN_SIGNER, Signer
from encommons.commons.instance import CommonsInstance
from encommons.commons.models import PHARecord, key_to_dict
from encommons.device.report import make_risk_report, report_to_json
from encommons.device.state import (
    DeviceRole,
    DeviceState,
    NoKeysInRangeError,
    advance_day,
    current_broadcast,
    device_new,
    publish_keys,
    record_observation,
    self_check,
)
from encommons.logs import get_logger
from encommons.protocol.intervals import INTERVALS_PER_DAY, day_index, day_start_of
from encommons.protocol.keys import RollingProximityIdentifier
from encommons.protocol.matching import DiagnosisKey, ReportType, RPIIndex, build_rpi_index

from .config import Diagnosis, WorldConfig
from .truth import ContactGroundTruth, contact_ground_truth

logger = get_logger(__name__)

DEFAULT_INSTANCE_ID = "commons"
PHA_ID = "pha-1"

_PARTICIPATION, _RADIO, _INTERVIEW, _TOKENS, _CREDENTIALS, _PHONE, _LIGHTHOUSE = range(7)

Emitter = tuple[str, int]  # ("p", person_id) or ("l", lighthouse index)
Owner = tuple[str, int]


def _stream(seed: int, purpose: int, *sub: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose, *sub)))


@dataclass(frozen=True, slots=True)
class SimMetrics:
    true_contacts: int
    detected_notifications: int
    detection_rate: float
    notified_persons: frozenset[int]
    lighthouse_self_detections: int
    notification_latency_days: dict[int, int]
    participants: frozenset[int] = frozenset()
    risk_reports: int = 0
    published_keys: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "true_contacts": self.true_contacts,
            "detected_notifications": self.detected_notifications,
            "detection_rate": self.detection_rate,
            "notified_persons": sorted(self.notified_persons),
            "lighthouse_self_detections": self.lighthouse_self_detections,
            "notification_latency_days": {
                str(k): v for k, v in sorted(self.notification_latency_days.items())
            },
            "participants": len(self.participants),
            "risk_reports": self.risk_reports,
            "published_keys": self.published_keys,
        }


@dataclass
class SimRun:
    """Metrics plus the artifacts needed to audit a run."""

    config: WorldConfig
    metrics: SimMetrics
    truth: ContactGroundTruth
    instances: dict[str, CommonsInstance]
    notifications: dict[int, list[dict[str, Any]]]
    risk_report_payloads: list[str]
    lighthouse_devices: dict[int, DeviceState]
    lighthouse_places: dict[int, str]
    key_owners: dict[bytes, Owner]
    lighthouse_self_risk: dict[int, float] = field(default_factory=dict)

    def published_by(self, owner: Owner) -> int:
        return sum(1 for o in self.key_owners.values() if o == owner)


class _Runner:
    def __init__(self, config: WorldConfig) -> None:
        self.cfg = config
        seed = config.seed
        self.now = 0

        if config.participants is not None:
            self.participants = frozenset(config.participants)
        else:
            u = _stream(seed, _PARTICIPATION).random(config.n_people)
            self.participants = frozenset(int(i) for i in np.flatnonzero(u < config.participation))

        self.radio = _stream(seed, _RADIO)
        self.interview = _stream(seed, _INTERVIEW)

        creds = _stream(seed, _CREDENTIALS)
        self.admin = Signer.from_private_bytes(ADMIN_SIGNER, creds.bytes(32))
        self.pha = Signer.from_private_bytes(PHA_ID, creds.bytes(32))

        self.instance_ids = config.federation or (DEFAULT_INSTANCE_ID,)
        self.instances: dict[str, CommonsInstance] = {}
        for k, iid in enumerate(self.instance_ids):
            inst = CommonsInstance(
                instance_id=iid,
                admin_public_key=self.admin.public_key,
                clock=self._clock,
                entropy=_stream(seed, _TOKENS, k),
            )
            inst.register_pha(PHARecord(PHA_ID, self.pha.public_key), self.admin)
            self.instances[iid] = inst
        for iid, inst in self.instances.items():
            for other, peer in self.instances.items():
                if other != iid:
                    inst.add_peer(other, peer)

        self.entropy: dict[Emitter, np.random.Generator] = {}
        self.devices: dict[Emitter, DeviceState] = {}
        self.home: dict[Emitter, str] = {}
        for i in sorted(self.participants):
            e = ("p", i)
            self.entropy[e] = _stream(seed, _PHONE, i)
            self.devices[e] = device_new(
                DeviceRole.PHONE, self.entropy[e], 0, config.retention_days
            )
            self.home[e] = self.instance_ids[i % len(self.instance_ids)]

        self.lighthouse_places: dict[int, str] = {}
        self.lighthouses_at: dict[str, list[int]] = defaultdict(list)
        j = 0
        for place in config.places:
            if place.lighthouse is None:
                continue
            e = ("l", j)
            self.entropy[e] = _stream(seed, _LIGHTHOUSE, j)
            self.devices[e] = device_new(
                place.lighthouse,
                self.entropy[e],
                0,
                config.retention_days,
                place_label=place.place_id,
            )
            self.home[e] = self.instance_ids[j % len(self.instance_ids)]
            self.lighthouse_places[j] = place.place_id
            self.lighthouses_at[place.place_id].append(j)
            j += 1

        self.presence: dict[int, dict[str, set[int]]] = defaultdict(lambda: defaultdict(set))
        for v in config.visit_schedule:
            for t in range(v.start, v.end):
                self.presence[t][v.place_id].add(v.person_id)
        self.diagnoses_at: dict[int, list[Diagnosis]] = defaultdict(list)
        for d in config.diagnoses:
            self.diagnoses_at[d.interval].append(d)

        self.key_owners: dict[bytes, Owner] = {}
        self.published_days: set[tuple[int, int]] = set()
        self.published_keys = 0
        self.risk_reports: list[str] = []

        self.cursors = {iid: 0 for iid in self.instance_ids}
        self.downloaded: dict[str, list[DiagnosisKey]] = {iid: [] for iid in self.instance_ids}
        self.indexes: dict[str, RPIIndex] = {}

        self.first_notified: dict[int, int] = {}
        self.owner_hits: dict[int, dict[Owner, int]] = defaultdict(dict)
        self.notifications: dict[int, list[dict[str, Any]]] = {}
        self.lighthouse_self_risk: dict[int, float] = {}

    def _clock(self) -> int:
        return self.now

    # ---- tick phases ----

    def run(self) -> SimRun:
        horizon = self.cfg.horizon
        for t in range(horizon):
            self.now = t
            if t > 0 and t % INTERVALS_PER_DAY == 0:
                self._check_all(t)
                self._advance_all(t)
            self._exchange(t)
            for d in self.diagnoses_at.get(t, ()):
                self._diagnose(d)
        self.now = horizon
        self._check_all(horizon)
        return self._finish()

    def _advance_all(self, t: int) -> None:
        for e, dev in self.devices.items():
            self.devices[e] = advance_day(dev, self.entropy[e], t)

    def _exchange(self, t: int) -> None:
        places = self.presence.get(t)
        if not places:
            return
        low, high = self.cfg.attenuation_band
        loss = self.cfg.radio_loss_prob
        broadcasts: dict[Emitter, RollingProximityIdentifier] = {}

        for place_id in sorted(places):
            emitters: list[Emitter] = [("p", i) for i in sorted(places[place_id])]
            emitters += [("l", j) for j in self.lighthouses_at.get(place_id, ())]
            pairs = [
                (a, b)
                for a in emitters
                for b in emitters
                if a != b and not (a[0] == "l" and b[0] == "l")
            ]
            if not pairs:
                continue
            draws = self.radio.random((len(pairs), 2))
            for (a, b), (u, v) in zip(pairs, draws, strict=True):
                if u < loss:
                    continue
                sender = self.devices.get(a)
                receiver = self.devices.get(b)
                if sender is None or receiver is None or not receiver.role.listens:
                    continue
                rpi = broadcasts.get(a)
                if rpi is None:
                    rpi = broadcasts[a] = current_broadcast(sender, t)
                self.devices[b] = record_observation(
                    receiver, rpi, t, low + float(v) * (high - low), self.cfg.dwell_s
                )

    def _publish(self, e: Emitter, first: int, last: int, owner: Owner) -> int:
        home = self.instances[self.home[e]]
        tags = [iid for iid in self.instance_ids if iid != self.home[e]]
        ota = home.issue_ota(self.pha, ReportType.CONFIRMED, (first, last), forward_tags=tags)
        try:
            teks = publish_keys(self.devices[e], (first, last), ota)
        except NoKeysInRangeError as err:
            logger.debug(f"{owner}: {err}")
            return 0
        receipt = home.upload_keys(ota.token, teks)
        for k in teks:
            self.key_owners.setdefault(k.key_material, owner)
        self.published_keys += receipt.accepted
        return receipt.accepted

    def _publish_lighthouse(self, j: int, day: int) -> None:
        if (j, day) in self.published_days:
            return
        self.published_days.add((j, day))
        self._publish(("l", j), day, day, ("lighthouse", j))

    def _diagnose(self, d: Diagnosis) -> None:
        i = d.person_id
        last = day_start_of(d.interval)
        first = max(0, last - (self.cfg.retention_days - 1) * INTERVALS_PER_DAY)

        if ("p", i) in self.devices:
            n = self._publish(("p", i), first, last, ("person", i))
            logger.debug(f"t={d.interval}: diagnosed participant published {n} keys")

        # manual interview: one recall draw per visited place
        visited: dict[str, set[int]] = defaultdict(set)
        for v in self.cfg.visit_schedule:
            if v.person_id != i:
                continue
            for t in range(max(v.start, first), min(v.end, d.interval + 1)):
                visited[v.place_id].add(day_start_of(t))
        for place_id in sorted(visited):
            if self.interview.random() >= self.cfg.interview_recall_prob:
                continue
            for j in self.lighthouses_at.get(place_id, ()):
                for day in sorted(visited[place_id]):
                    self._publish_lighthouse(j, day)

    def _refresh_keys(self, iid: str) -> RPIIndex | None:
        batch, cursor = self.instances[iid].download_keys(cursor=self.cursors[iid])
        self.cursors[iid] = cursor
        if batch or iid not in self.indexes:
            self.downloaded[iid].extend(batch)
            self.indexes[iid] = build_rpi_index(self.downloaded[iid])
        return self.indexes[iid] if self.downloaded[iid] else None

    def _check_all(self, t: int) -> None:
        policy = self.cfg.policy
        indexes = {iid: self._refresh_keys(iid) for iid in self.instance_ids}

        for e, dev in list(self.devices.items()):
            index = indexes[self.home[e]]
            if index is None or not dev.role.listens:
                continue
            keys = self.downloaded[self.home[e]]
            risk, matches = self_check(dev, keys, policy, index=index)
            if float(risk) <= 0:
                continue
            kind, n = e
            if kind == "p":
                self.first_notified.setdefault(n, t)
                self.notifications[n] = [key_to_dict(m.key) for m in matches]
                for m in matches:
                    owner = self.key_owners.get(m.key.tek.key_material)
                    if owner is not None:
                        self.owner_hits[n].setdefault(owner, t)
                continue

            self.lighthouse_self_risk[n] = max(self.lighthouse_self_risk.get(n, 0.0), float(risk))
            if self.cfg.lighthouse_auto_publish:
                report = make_risk_report(dev, keys, policy, f"lighthouse-{n}", index=index)
                fresh = [day for day in report.exposed_days if (n, day) not in self.published_days]
                if fresh:
                    self.risk_reports.append(report_to_json(report))
                    for day in fresh:
                        self._publish_lighthouse(n, day)

    # ---- metrics ----

    def _finish(self) -> SimRun:
        truth = contact_ground_truth(self.cfg)
        windows = {}
        for d in self.cfg.diagnoses:
            last = day_start_of(d.interval)
            first = max(0, last - (self.cfg.retention_days - 1) * INTERVALS_PER_DAY)
            windows[d.person_id] = (first, d.interval)

        shared: dict[tuple[int, int], set[str]] = defaultdict(set)
        last_contact: dict[tuple[int, int], int] = {}
        for a, b, t, place_id in truth.pairs:
            w = windows.get(a)
            if w is None or not w[0] <= t <= w[1]:
                continue
            shared[(a, b)].add(place_id)
            last_contact[(a, b)] = max(last_contact.get((a, b), t), t)

        detected = 0
        latency: dict[int, int] = defaultdict(int)
        for (a, b), places in sorted(shared.items()):
            hits = self.owner_hits.get(b)
            if not hits:
                continue
            owners = [("person", a)] + [
                ("lighthouse", j) for p in sorted(places) for j in self.lighthouses_at.get(p, ())
            ]
            times = [hits[o] for o in owners if o in hits]
            if not times:
                continue
            detected += 1
            latency[day_index(min(times)) - day_index(last_contact[(a, b)])] += 1

        true_contacts = len(shared)
        metrics = SimMetrics(
            true_contacts=true_contacts,
            detected_notifications=detected,
            detection_rate=detected / true_contacts if true_contacts else 0.0,
            notified_persons=frozenset(self.first_notified),
            lighthouse_self_detections=len(self.lighthouse_self_risk),
            notification_latency_days=dict(sorted(latency.items())),
            participants=self.participants,
            risk_reports=len(self.risk_reports),
            published_keys=self.published_keys,
        )
        logger.info(
            f"seed={self.cfg.seed} p={self.cfg.participation}: "
            f"{detected}/{true_contacts} contacts detected, "
            f"{len(metrics.notified_persons)} notified, {self.published_keys} keys published"
        )
        return SimRun(
            config=self.cfg,
            metrics=metrics,
            truth=truth,
            instances=self.instances,
            notifications=self.notifications,
            risk_report_payloads=self.risk_reports,
            lighthouse_devices={
                n: dev for (kind, n), dev in self.devices.items() if kind == "l"
            },
            lighthouse_places=self.lighthouse_places,
            key_owners=self.key_owners,
            lighthouse_self_risk=self.lighthouse_self_risk,
        )


def simulate(config: WorldConfig) -> SimRun:
    return _Runner(config).run()


def run_world(config: WorldConfig) -> SimMetrics:
    """Run one world; identical configs give identical metrics."""

    return simulate(config).metrics
