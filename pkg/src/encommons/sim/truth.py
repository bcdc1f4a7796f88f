"""encommons.sim.truth

Co-presence ground truth and random world generation.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import pandas as pd

from encommons.device.state import DeviceRole
from encommons.protocol.intervals import INTERVALS_PER_DAY
from encommons.protocol.matching import ExposurePolicy

from .config import Diagnosis, PlaceSpec, Visit, WorldConfig

PRESENCE_COLUMNS = ["person_id", "place_id", "interval"]


@dataclass(frozen=True, slots=True)
class ContactGroundTruth:
    """Every (a, b, interval, place_id) with a and b present together.

    Both orders of each pair are included.
    """

    pairs: frozenset[tuple[int, int, int, str]]

    def __len__(self) -> int:
        return len(self.pairs)

    def contacts_of(self, person_id: int) -> set[int]:
        return {b for a, b, _, _ in self.pairs if a == person_id}

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(sorted(self.pairs), columns=["a", "b", "interval", "place_id"])


def presence_frame(visits: Iterable[Visit]) -> pd.DataFrame:
    """One row per (person, place, interval) a visit covers."""

    rows = [(v.person_id, v.place_id, t) for v in visits for t in range(v.start, v.end)]
    return pd.DataFrame(rows, columns=PRESENCE_COLUMNS).drop_duplicates(ignore_index=True)


def contact_ground_truth(config: WorldConfig) -> ContactGroundTruth:
    """Pure function of the visit schedule; participation plays no part."""

    pres = presence_frame(config.visit_schedule)
    if pres.empty:
        return ContactGroundTruth(frozenset())
    both = pres.merge(pres, on=["place_id", "interval"], suffixes=("_a", "_b"))
    both = both[both["person_id_a"] != both["person_id_b"]]
    pairs = frozenset(
        (int(a), int(b), int(t), str(p))
        for a, b, t, p in zip(
            both["person_id_a"], both["person_id_b"], both["interval"], both["place_id"],
            strict=True,
        )
    )
    return ContactGroundTruth(pairs)


def random_world(
    seed: int,
    n_people: int = 1000,
    n_places: int = 100,
    days: int = 2,
    visits_per_day: int = 2,
    visit_intervals: int = 4,
    n_diagnosed: int = 50,
    *,
    participation: float = 1.0,
    lighthouse_fraction: float = 0.0,
    passive_fraction: float = 0.0,
    radio_loss_prob: float = 0.0,
    interview_recall_prob: float = 1.0,
    policy: ExposurePolicy | None = None,
    day_window: tuple[int, int] = (32, 88),
) -> WorldConfig:
    """A world of slot-aligned daytime visits.

    Each person makes ``visits_per_day`` non-overlapping visits per day, each
    lasting ``visit_intervals`` intervals and starting on a slot boundary
    inside ``day_window`` (interval-of-day bounds). Places are uniform.
    ``n_diagnosed`` distinct people are diagnosed in the last interval.
    A ``lighthouse_fraction`` of places get a lighthouse, of which a
    ``passive_fraction`` are transmit-only.
    """

    lo, hi = day_window
    n_slots = (hi - lo) // visit_intervals
    if not 0 <= lo < hi <= INTERVALS_PER_DAY:
        raise ValueError(f"bad day window {day_window}")
    if visits_per_day > n_slots:
        raise ValueError(f"{visits_per_day} visits do not fit in {n_slots} slots")
    if n_diagnosed > n_people:
        raise ValueError(f"cannot diagnose {n_diagnosed} of {n_people} people")

    rng = np.random.default_rng(seed)
    place_ids = [f"p{j:04d}" for j in range(n_places)]
    has_lh = rng.random(n_places) < lighthouse_fraction
    passive = rng.random(n_places) < passive_fraction
    places = tuple(
        PlaceSpec(
            pid,
            (DeviceRole.LIGHTHOUSE_PASSIVE if passive[j] else DeviceRole.LIGHTHOUSE_ACTIVE)
            if has_lh[j]
            else None,
        )
        for j, pid in enumerate(place_ids)
    )

    visits = []
    for d in range(days):
        base = d * INTERVALS_PER_DAY + lo
        for i in range(n_people):
            slots = np.sort(rng.choice(n_slots, size=visits_per_day, replace=False))
            where = rng.integers(0, n_places, size=visits_per_day)
            for s, w in zip(slots, where, strict=True):
                start = base + int(s) * visit_intervals
                visits.append(Visit(i, place_ids[int(w)], start, start + visit_intervals))

    last = days * INTERVALS_PER_DAY - 1
    diagnosed = np.sort(rng.choice(n_people, size=n_diagnosed, replace=False))
    diagnoses = tuple(Diagnosis(int(i), last) for i in diagnosed)

    return WorldConfig(
        seed=int(seed),
        n_people=n_people,
        participation=participation,
        places=places,
        visit_schedule=tuple(visits),
        radio_loss_prob=radio_loss_prob,
        interview_recall_prob=interview_recall_prob,
        policy=policy or ExposurePolicy(),
        diagnoses=diagnoses,
    )
