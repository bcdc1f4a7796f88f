"""encommons.protocol.io

File formats for the protocol layer.

- Golden vector file: ``tek_hex,day_start,interval,rpi_hex`` per line, no header, LF.
- Observation log: CSV with header ``rpi_hex,interval,attenuation_db,duration_s``.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from .keys import (
    RollingProximityIdentifier,
    TemporaryExposureKey,
    derive_rpi,
    derive_rpi_sequence,
)
from .matching import ObservedBeacon

PATHLIKE = str | Path

VECTOR_COLUMNS = ["tek_hex", "day_start", "interval", "rpi_hex"]
LOG_COLUMNS = ["rpi_hex", "interval", "attenuation_db", "duration_s"]


class ProtocolFileError(RuntimeError):
    """Malformed or unreadable protocol file."""


@dataclass(frozen=True, slots=True)
class VectorMismatch:
    line: int
    expected_rpi_hex: str
    actual_rpi_hex: str


def golden_rows(teks: Iterable[TemporaryExposureKey]) -> pd.DataFrame:
    """One row per (key, interval) across each key's full rolling period."""

    rows = []
    for tek in teks:
        for j, rpi in enumerate(derive_rpi_sequence(tek)):
            rows.append((tek.hex, tek.day_start, tek.day_start + j, rpi.hex))
    return pd.DataFrame(rows, columns=VECTOR_COLUMNS)


def write_vectors(rows: pd.DataFrame, path: PATHLIKE) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    rows.loc[:, VECTOR_COLUMNS].to_csv(p, index=False, header=False, lineterminator="\n")
    return p


def read_vectors(path: PATHLIKE) -> pd.DataFrame:
    try:
        df = pd.read_csv(
            path,
            header=None,
            names=VECTOR_COLUMNS,
            dtype={"tek_hex": str, "day_start": "int64", "interval": "int64", "rpi_hex": str},
        )
    except (OSError, ValueError) as e:
        raise ProtocolFileError(f"cannot read vector file {path}: {e}") from e
    return df


def verify_vectors(path: PATHLIKE) -> list[VectorMismatch]:
    """Re-derive every vector and report lines whose RPI differs."""

    df = read_vectors(path)
    out: list[VectorMismatch] = []
    teks: dict[tuple[str, int], TemporaryExposureKey] = {}
    for line, row in enumerate(df.itertuples(index=False), start=1):
        k = (row.tek_hex, int(row.day_start))
        if k not in teks:
            teks[k] = TemporaryExposureKey.from_hex(row.tek_hex, int(row.day_start))
        actual = derive_rpi(teks[k], int(row.interval)).hex
        if actual != row.rpi_hex:
            out.append(VectorMismatch(line, row.rpi_hex, actual))
    return out


def read_observation_log(path: PATHLIKE) -> list[ObservedBeacon]:
    try:
        df = pd.read_csv(path, dtype={"rpi_hex": str}, keep_default_na=False)
    except (OSError, ValueError) as e:
        raise ProtocolFileError(f"cannot read observation log {path}: {e}") from e
    missing = [c for c in LOG_COLUMNS if c not in df.columns]
    if missing:
        raise ProtocolFileError(f"observation log {path} missing columns: {missing}")
    try:
        return [
            ObservedBeacon(
                rpi=RollingProximityIdentifier.from_hex(r.rpi_hex),
                interval=int(r.interval),
                attenuation_db=float(r.attenuation_db),
                duration_s=float(r.duration_s),
            )
            for r in df.itertuples(index=False)
        ]
    except (ValueError, TypeError) as e:
        raise ProtocolFileError(f"malformed entry in observation log {path}: {e}") from e


def write_observation_log(log: Iterable[ObservedBeacon], path: PATHLIKE) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        [(b.rpi.hex, b.interval, b.attenuation_db, b.duration_s) for b in log],
        columns=LOG_COLUMNS,
    )
    df.to_csv(p, index=False, lineterminator="\n")
    return p
