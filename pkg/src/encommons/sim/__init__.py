"""encommons.sim

Deterministic simulation of people, places, lighthouses, a PHA and Commons
instances.
"""

from .config import (
    Diagnosis,
    PlaceSpec,
    Visit,
    WorldConfig,
    WorldConfigError,
    load_world_config,
    save_world_config,
)
from .scenarios import (
    AveryBernieResult,
    ScenarioError,
    avery_bernie_config,
    only_lighthouse_keys_stored,
    scenario_avery_bernie,
)
from .sweep import participation_sweep, sweep_slope, sweep_table, trial_seed
from .truth import ContactGroundTruth, contact_ground_truth, presence_frame, random_world
from .world import SimMetrics, SimRun, run_world, simulate

__all__ = [
    "WorldConfig",
    "WorldConfigError",
    "PlaceSpec",
    "Visit",
    "Diagnosis",
    "load_world_config",
    "save_world_config",
    "ContactGroundTruth",
    "contact_ground_truth",
    "presence_frame",
    "random_world",
    "SimMetrics",
    "SimRun",
    "run_world",
    "simulate",
    "AveryBernieResult",
    "ScenarioError",
    "avery_bernie_config",
    "only_lighthouse_keys_stored",
    "scenario_avery_bernie",
    "participation_sweep",
    "sweep_table",
    "sweep_slope",
    "trial_seed",
]
