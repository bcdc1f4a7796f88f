"""encommons.cli.estimate

Back-of-envelope Commons load: download volume and matching work per day.
"""

from __future__ import annotations

from dataclasses import dataclass

from encommons.protocol.intervals import INTERVALS_PER_DAY
from encommons.protocol.keys import TEK_LENGTH


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass(frozen=True, slots=True)
class BandwidthEstimate:
    diagnoses_per_day: int
    teks_per_diagnosis: int
    bytes_per_tek: int
    overhead_factor: float
    raw_bytes_per_day: int
    reported_bytes_per_day: float
    rpi_derivations_per_day: int

    def lines(self) -> list[str]:
        return [
            f"raw_bytes_per_day={self.raw_bytes_per_day}",
            f"reported_bytes_per_day={_num(self.reported_bytes_per_day)}",
            f"rpi_derivations_per_day={self.rpi_derivations_per_day}",
        ]


def estimate_bandwidth(
    diagnoses_per_day: int,
    teks_per_diagnosis: int,
    bytes_per_tek: int = TEK_LENGTH,
    overhead_factor: float = 1.0,
) -> BandwidthEstimate:
    """Raw bytes = diagnoses x keys x key size; every device derives 96 RPIs per key."""

    for name, v in (
        ("diagnoses_per_day", diagnoses_per_day),
        ("teks_per_diagnosis", teks_per_diagnosis),
        ("bytes_per_tek", bytes_per_tek),
        ("overhead_factor", overhead_factor),
    ):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")

    keys = int(diagnoses_per_day) * int(teks_per_diagnosis)
    raw = keys * int(bytes_per_tek)
    return BandwidthEstimate(
        diagnoses_per_day=int(diagnoses_per_day),
        teks_per_diagnosis=int(teks_per_diagnosis),
        bytes_per_tek=int(bytes_per_tek),
        overhead_factor=float(overhead_factor),
        raw_bytes_per_day=raw,
        reported_bytes_per_day=raw * float(overhead_factor),
        rpi_derivations_per_day=keys * INTERVALS_PER_DAY,
    )
