"""encommons

Exposure notification with lighthouses and a federated diagnosis-key Commons.

The key schedule and matching live in `encommons.protocol`; phones and
lighthouses in `encommons.device`; Commons instances, their HTTP surface and
federation in `encommons.commons`; the deterministic simulator in
`encommons.sim`.
"""

__all__ = [
    # protocol
    "INTERVALS_PER_DAY",
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
    "match_exposures",
    "score_risk",
    "filter_keys",
    # device
    "DeviceRole",
    "DeviceState",
    "device_new",
    "advance_day",
    "current_broadcast",
    "record_observation",
    "self_check",
    "publish_keys",
    "AggregateRiskReport",
    "make_risk_report",
    "make_receipt_code",
    "check_receipt_code",
    # commons
    "CommonsInstance",
    "CommonsError",
    "StatusCode",
    "Signer",
    "PHARecord",
    "OneTimeAuthorization",
    "KeyStoreRecord",
    "DownloadFilter",
    "Subscription",
    "UploadStatus",
    "export_keys",
    "read_export",
    # sim
    "WorldConfig",
    "SimMetrics",
    "run_world",
    "simulate",
    "scenario_avery_bernie",
    "participation_sweep",
    "random_world",
    # stats / reporting / utils / config
    "LogLogFit",
    "loglog_slope",
    "to_csv",
    "to_json",
    "CommonsDiagnostics",
    "diagnose_commons",
    "Settings",
    "configure_logging",
]

from .commons import (
    CommonsError,
    CommonsInstance,
    DownloadFilter,
    KeyStoreRecord,
    OneTimeAuthorization,
    PHARecord,
    Signer,
    StatusCode,
    Subscription,
    UploadStatus,
    export_keys,
    read_export,
)
from .config import Settings
from .device import (
    AggregateRiskReport,
    DeviceRole,
    DeviceState,
    advance_day,
    check_receipt_code,
    current_broadcast,
    device_new,
    make_receipt_code,
    make_risk_report,
    publish_keys,
    record_observation,
    self_check,
)
from .logs import configure_logging
from .protocol import (
    INTERVALS_PER_DAY,
    DiagnosisKey,
    ExposureMatch,
    ExposurePolicy,
    ObservedBeacon,
    ReportType,
    RiskScore,
    RollingProximityIdentifier,
    TemporaryExposureKey,
    derive_rpi,
    derive_rpi_sequence,
    filter_keys,
    generate_tek,
    match_exposures,
    score_risk,
)
from .reporting import to_csv, to_json
from .sim import (
    SimMetrics,
    WorldConfig,
    participation_sweep,
    random_world,
    run_world,
    scenario_avery_bernie,
    simulate,
)
from .stats import LogLogFit, loglog_slope
from .utils import CommonsDiagnostics, diagnose_commons
