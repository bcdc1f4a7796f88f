"""encommons.protocol

Key schedule, interval arithmetic, exposure matching and risk scoring.
"""

from .intervals import (
    INTERVAL_SECONDS,
    INTERVALS_PER_DAY,
    IntervalError,
    UnalignedDayError,
    day_start_of,
    day_starts_between,
    interval_from_timestamp,
    is_day_aligned,
)
from .io import (
    ProtocolFileError,
    VectorMismatch,
    golden_rows,
    read_observation_log,
    read_vectors,
    verify_vectors,
    write_observation_log,
    write_vectors,
)
from .keys import (
    RPI_LENGTH,
    TEK_LENGTH,
    EntropySource,
    KeyScheduleError,
    RollingProximityIdentifier,
    SystemEntropy,
    TemporaryExposureKey,
    derive_rpi,
    derive_rpi_sequence,
    generate_tek,
)
from .matching import (
    DiagnosisKey,
    ExposureMatch,
    ExposurePolicy,
    ObservedBeacon,
    ReportType,
    RiskScore,
    RPIIndex,
    build_rpi_index,
    filter_keys,
    match_exposures,
    score_risk,
)

__all__ = [
    "INTERVAL_SECONDS",
    "INTERVALS_PER_DAY",
    "RPI_LENGTH",
    "TEK_LENGTH",
    "IntervalError",
    "UnalignedDayError",
    "day_start_of",
    "day_starts_between",
    "interval_from_timestamp",
    "is_day_aligned",
    "EntropySource",
    "SystemEntropy",
    "KeyScheduleError",
    "TemporaryExposureKey",
    "RollingProximityIdentifier",
    "generate_tek",
    "derive_rpi",
    "derive_rpi_sequence",
    "ReportType",
    "DiagnosisKey",
    "ObservedBeacon",
    "ExposurePolicy",
    "ExposureMatch",
    "RiskScore",
    "RPIIndex",
    "build_rpi_index",
    "match_exposures",
    "score_risk",
    "filter_keys",
    "ProtocolFileError",
    "VectorMismatch",
    "golden_rows",
    "write_vectors",
    "read_vectors",
    "verify_vectors",
    "read_observation_log",
    "write_observation_log",
]
