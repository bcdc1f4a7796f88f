"""encommons.sim.scenarios

Fixed worlds with built-in checks.

The shop-and-bus scenario: Avery, who has no app, visits a shop and then
rides a bus. Bernie, who has the app, rides the same bus later that day and
never meets Avery. Avery is diagnosed; the interview names both places, so
their lighthouses publish the day's keys. Bernie is notified through the bus
lighthouse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from encommons.device.state import DeviceRole
from encommons.logs import get_logger

from .config import Diagnosis, PlaceSpec, Visit, WorldConfig
from .world import SimMetrics, SimRun, simulate

logger = get_logger(__name__)

AVERY, BERNIE = 0, 1
SHOP, BUS = "shop", "bus"


class ScenarioError(AssertionError):
    """A scenario check failed."""


@dataclass(frozen=True, slots=True)
class AveryBernieResult:
    metrics: SimMetrics
    bernie_notified: bool
    avery_absent: bool
    no_place_label: bool
    shop_self_detections: int
    shop_published: int
    bus_published: int

    def lines(self) -> list[str]:
        def flag(b: bool) -> str:
            return "true" if b else "false"

        return [
            f"bernie_notified={flag(self.bernie_notified)}",
            f"avery_absent={flag(self.avery_absent)}",
            f"no_place_label={flag(self.no_place_label)}",
            f"shop_self_detections={self.shop_self_detections}",
            f"shop_published={self.shop_published}",
            f"bus_published={self.bus_published}",
        ]


def avery_bernie_config(seed: int = 7) -> WorldConfig:
    return WorldConfig(
        seed=seed,
        n_people=2,
        participation=0.0,
        participants=(BERNIE,),
        places=(
            PlaceSpec(SHOP, DeviceRole.LIGHTHOUSE_ACTIVE),
            PlaceSpec(BUS, DeviceRole.LIGHTHOUSE_ACTIVE),
        ),
        visit_schedule=(
            Visit(AVERY, SHOP, 36, 40),
            Visit(AVERY, BUS, 40, 42),
            Visit(BERNIE, BUS, 60, 62),
        ),
        radio_loss_prob=0.0,
        interview_recall_prob=1.0,
        diagnoses=(Diagnosis(AVERY, 80),),
    )


def only_lighthouse_keys_stored(run: SimRun) -> bool:
    """True when every key any instance holds was published by a lighthouse, and there is one."""

    stored = [
        r.diagnosis_key.tek.key_material for inst in run.instances.values() for r in inst.records()
    ]
    return bool(stored) and all(
        run.key_owners.get(k, ("person", -1))[0] == "lighthouse" for k in stored
    )


def scenario_avery_bernie(seed: int = 7) -> AveryBernieResult:
    """Run the shop-and-bus world and check its outcome; raises ``ScenarioError``."""

    run = simulate(avery_bernie_config(seed))
    shop = next(j for j, p in run.lighthouse_places.items() if p == SHOP)
    bus = next(j for j, p in run.lighthouse_places.items() if p == BUS)

    state_text = json.dumps([inst.state_dict() for inst in run.instances.values()]).lower()
    avery_absent = only_lighthouse_keys_stored(run)

    payloads = json.dumps(run.notifications, sort_keys=True) + "".join(run.risk_report_payloads)
    labels = set(run.lighthouse_places.values())
    no_place_label = not any(label in payloads for label in labels)
    no_place_label = no_place_label and not any(label in state_text for label in labels)

    result = AveryBernieResult(
        metrics=run.metrics,
        bernie_notified=BERNIE in run.metrics.notified_persons,
        avery_absent=avery_absent,
        no_place_label=no_place_label,
        shop_self_detections=int(run.lighthouse_self_risk.get(shop, 0.0) > 0),
        shop_published=run.published_by(("lighthouse", shop)),
        bus_published=run.published_by(("lighthouse", bus)),
    )

    failures = []
    if not result.bernie_notified:
        failures.append("bernie was not notified")
    if not result.avery_absent:
        failures.append("avery appears in commons state")
    if not result.no_place_label:
        failures.append("a place label leaked into a payload")
    if result.shop_self_detections != 0:
        failures.append("shop lighthouse self-detected an exposure")
    if result.shop_published == 0 or result.bus_published == 0:
        failures.append("a recalled lighthouse did not publish")
    if failures:
        raise ScenarioError("; ".join(failures))
    logger.info("shop-and-bus scenario passed")
    return result
