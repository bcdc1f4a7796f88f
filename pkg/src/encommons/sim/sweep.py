"""encommons.sim.sweep

Detection rate as a function of participation.

Trial ``k`` uses the same derived seed at every participation level, so the
set of participants at a higher level contains the set at a lower one and
the radio draws are shared.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
import pandas as pd

from encommons.logs import get_logger
from encommons.stats.regression import LogLogFit, loglog_slope

from .config import WorldConfig
from .world import run_world

logger = get_logger(__name__)

SWEEP_COLUMNS = ["p", "trial", "detection_rate"]


def trial_seed(base_seed: int, trial: int) -> int:
    state = np.random.SeedSequence(base_seed, spawn_key=(trial,)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def _one(args: tuple[WorldConfig, float, int]) -> tuple[float, int, float]:
    base, p, trial = args
    cfg = replace(base, seed=trial_seed(base.seed, trial), participation=p, participants=None)
    return p, trial, run_world(cfg).detection_rate


def sweep_table(
    base_config: WorldConfig,
    participations: Sequence[float],
    trials: int,
    *,
    workers: int = 1,
) -> pd.DataFrame:
    """One row per (p, trial): ``p, trial, detection_rate``."""

    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    jobs = [(base_config, float(p), k) for p in participations for k in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_one(j) for j in jobs]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def participation_sweep(
    base_config: WorldConfig,
    participations: Sequence[float],
    trials: int,
    *,
    workers: int = 1,
) -> list[tuple[float, float]]:
    """Mean detection rate per participation level, in the order given."""

    table = sweep_table(base_config, participations, trials, workers=workers)
    means = table.groupby("p", sort=False)["detection_rate"].mean()
    out = [(float(p), float(means.loc[float(p)])) for p in participations]
    for p, rate in out:
        logger.info(f"p={p:.3f}: mean detection rate {rate:.4f} over {trials} trials")
    return out


def sweep_slope(rows: Sequence[tuple[float, float]] | pd.DataFrame) -> LogLogFit:
    """Log-log slope of mean detection rate against participation.

    Accepts ``participation_sweep`` output or a ``sweep_table`` frame.
    """

    if isinstance(rows, pd.DataFrame):
        means = rows.groupby("p")["detection_rate"].mean()
        return loglog_slope(means.index.to_numpy(), means.to_numpy())
    ps = [p for p, _ in rows]
    rates = [r for _, r in rows]
    return loglog_slope(ps, rates)
