"""encommons.sim.config

World description for a simulation run, loadable from JSON.

Person identifiers are integers ``0 .. n_people - 1``. A place may host any
number of lighthouses; a ``places`` entry with ``lighthouse=None`` declares a
place without one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from encommons.device.state import DEFAULT_RETENTION_DAYS, DeviceRole
from encommons.protocol.intervals import INTERVALS_PER_DAY
from encommons.protocol.matching import ExposurePolicy


class WorldConfigError(ValueError):
    """Invalid world configuration."""


@dataclass(frozen=True, slots=True)
class PlaceSpec:
    place_id: str
    lighthouse: DeviceRole | None = None

    def __post_init__(self) -> None:
        if not self.place_id:
            raise WorldConfigError("place_id must be non-empty")
        if self.lighthouse is DeviceRole.PHONE:
            raise WorldConfigError(f"place {self.place_id!r}: a phone is not a lighthouse")


@dataclass(frozen=True, slots=True)
class Visit:
    """``person_id`` at ``place_id`` during intervals ``[start, end)``."""

    person_id: int
    place_id: str
    start: int
    end: int


@dataclass(frozen=True, slots=True)
class Diagnosis:
    person_id: int
    interval: int


@dataclass(frozen=True, slots=True)
class WorldConfig:
    seed: int
    n_people: int
    participation: float
    places: tuple[PlaceSpec, ...]
    visit_schedule: tuple[Visit, ...]
    radio_loss_prob: float = 0.0
    interview_recall_prob: float = 1.0
    policy: ExposurePolicy = field(default_factory=ExposurePolicy)
    diagnoses: tuple[Diagnosis, ...] = ()
    attenuation_band: tuple[float, float] = (40.0, 60.0)
    dwell_s: float = 900.0
    lighthouse_auto_publish: bool = False
    retention_days: int = DEFAULT_RETENTION_DAYS
    federation: tuple[str, ...] = ()
    participants: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "visit_schedule", tuple(self.visit_schedule))
        object.__setattr__(self, "diagnoses", tuple(self.diagnoses))
        object.__setattr__(self, "federation", tuple(self.federation))
        object.__setattr__(self, "attenuation_band", tuple(self.attenuation_band))
        if self.participants is not None:
            object.__setattr__(self, "participants", tuple(sorted(set(self.participants))))
        self._validate()

    def _validate(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise WorldConfigError(f"seed must fit in 64 bits, got {self.seed}")
        if self.n_people < 0:
            raise WorldConfigError(f"n_people must be >= 0, got {self.n_people}")
        if not 0.0 <= self.participation <= 1.0:
            raise WorldConfigError(f"participation must be in [0, 1], got {self.participation}")
        if not 0.0 <= self.radio_loss_prob < 1.0:
            raise WorldConfigError(
                f"radio_loss_prob must be in [0, 1), got {self.radio_loss_prob}"
            )
        if not 0.0 <= self.interview_recall_prob <= 1.0:
            raise WorldConfigError(
                f"interview_recall_prob must be in [0, 1], got {self.interview_recall_prob}"
            )
        low, high = self.attenuation_band
        if not 0.0 <= low <= high:
            raise WorldConfigError(f"bad attenuation band {self.attenuation_band}")
        if self.dwell_s <= 0:
            raise WorldConfigError(f"dwell_s must be > 0, got {self.dwell_s}")
        if self.retention_days < 1:
            raise WorldConfigError(f"retention_days must be >= 1, got {self.retention_days}")
        if len(set(self.federation)) != len(self.federation):
            raise WorldConfigError("federation instance ids must be distinct")

        place_ids = {p.place_id for p in self.places}
        for v in self.visit_schedule:
            if not 0 <= v.person_id < self.n_people:
                raise WorldConfigError(f"visit by unknown person {v.person_id}")
            if v.place_id not in place_ids:
                raise WorldConfigError(f"visit to unknown place {v.place_id!r}")
            if not 0 <= v.start < v.end:
                raise WorldConfigError(
                    f"visit of person {v.person_id} has bad intervals [{v.start}, {v.end})"
                )

        seen: set[int] = set()
        for d in self.diagnoses:
            if not 0 <= d.person_id < self.n_people:
                raise WorldConfigError(f"diagnosis of unknown person {d.person_id}")
            if d.person_id in seen:
                raise WorldConfigError(f"person {d.person_id} diagnosed twice")
            if d.interval < 0:
                raise WorldConfigError(f"diagnosis interval must be >= 0, got {d.interval}")
            seen.add(d.person_id)

        if self.participants is not None:
            bad = [i for i in self.participants if not 0 <= i < self.n_people]
            if bad:
                raise WorldConfigError(f"unknown participants {bad}")

    @property
    def horizon(self) -> int:
        """First interval after the last simulated day."""

        last = 0
        for v in self.visit_schedule:
            last = max(last, v.end)
        for d in self.diagnoses:
            last = max(last, d.interval + 1)
        days = max(1, -(-last // INTERVALS_PER_DAY))
        return days * INTERVALS_PER_DAY

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "n_people": self.n_people,
            "participation": self.participation,
            "places": [
                {
                    "place_id": p.place_id,
                    "lighthouse": p.lighthouse.value if p.lighthouse is not None else None,
                }
                for p in self.places
            ],
            "visit_schedule": [
                [v.person_id, v.place_id, v.start, v.end] for v in self.visit_schedule
            ],
            "radio_loss_prob": self.radio_loss_prob,
            "interview_recall_prob": self.interview_recall_prob,
            "policy": self.policy.to_dict(),
            "diagnoses": [[d.person_id, d.interval] for d in self.diagnoses],
            "attenuation_band": list(self.attenuation_band),
            "dwell_s": self.dwell_s,
            "lighthouse_auto_publish": self.lighthouse_auto_publish,
            "retention_days": self.retention_days,
            "federation": list(self.federation),
            "participants": list(self.participants) if self.participants is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> WorldConfig:
        try:
            return cls(
                seed=int(d["seed"]),
                n_people=int(d["n_people"]),
                participation=float(d["participation"]),
                places=tuple(
                    PlaceSpec(
                        p["place_id"],
                        DeviceRole(p["lighthouse"]) if p.get("lighthouse") else None,
                    )
                    for p in d.get("places", ())
                ),
                visit_schedule=tuple(
                    Visit(int(v[0]), str(v[1]), int(v[2]), int(v[3]))
                    for v in d.get("visit_schedule", ())
                ),
                radio_loss_prob=float(d.get("radio_loss_prob", 0.0)),
                interview_recall_prob=float(d.get("interview_recall_prob", 1.0)),
                policy=ExposurePolicy(**d["policy"]) if d.get("policy") else ExposurePolicy(),
                diagnoses=tuple(
                    Diagnosis(int(x[0]), int(x[1])) for x in d.get("diagnoses", ())
                ),
                attenuation_band=tuple(d.get("attenuation_band", (40.0, 60.0))),
                dwell_s=float(d.get("dwell_s", 900.0)),
                lighthouse_auto_publish=bool(d.get("lighthouse_auto_publish", False)),
                retention_days=int(d.get("retention_days", DEFAULT_RETENTION_DAYS)),
                federation=tuple(d.get("federation", ())),
                participants=tuple(d["participants"])
                if d.get("participants") is not None
                else None,
            )
        except WorldConfigError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise WorldConfigError(f"invalid world config: {e}") from e


def load_world_config(path: str | Path) -> WorldConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise WorldConfigError(f"cannot read world config {p}: {e}") from e
    if not isinstance(raw, dict):
        raise WorldConfigError(f"{p}: top level must be an object")
    return WorldConfig.from_dict(raw)


def save_world_config(config: WorldConfig, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(config.to_json() + "\n", encoding="utf-8", newline="\n")
    return p
