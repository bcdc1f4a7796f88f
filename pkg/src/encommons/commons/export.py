"""encommons.commons.export

Key export file:

    en-commons-export v1
    tek_hex,day_start,report_type,pha_id,region_tags,origin_instance,seq

Region tags are semicolon-joined. Empty ``pha_id`` / ``origin_instance`` mean absent.
There is no rolling-period column: every exported key covers a full day, and
``export_frame`` refuses keys that do not.
"""

from __future__ import annotations

from collections.abc import Iterable
from io import StringIO
from pathlib import Path

import pandas as pd

from encommons.protocol.intervals import INTERVALS_PER_DAY
from encommons.protocol.keys import TemporaryExposureKey
from encommons.protocol.matching import DiagnosisKey, ReportType

from .models import KeyStoreRecord

EXPORT_HEADER = "en-commons-export v1"
EXPORT_COLUMNS = [
    "tek_hex",
    "day_start",
    "report_type",
    "pha_id",
    "region_tags",
    "origin_instance",
    "seq",
]


class ExportFormatError(RuntimeError):
    """Malformed key export file."""


def export_frame(records: Iterable[KeyStoreRecord]) -> pd.DataFrame:
    records = list(records)
    for r in records:
        tek = r.diagnosis_key.tek
        if tek.rolling_period != INTERVALS_PER_DAY:
            raise ExportFormatError(
                f"key {tek.hex} day {tek.day_start} covers {tek.rolling_period} intervals; "
                "export files hold full-day keys only"
            )
    rows = [
        (
            r.diagnosis_key.tek.hex,
            r.diagnosis_key.tek.day_start,
            r.diagnosis_key.report_type.value,
            r.diagnosis_key.pha_id or "",
            ";".join(sorted(r.diagnosis_key.region_tags)),
            r.origin_instance or "",
            r.seq,
        )
        for r in records
    ]
    return pd.DataFrame(rows, columns=EXPORT_COLUMNS)


def export_keys(records: Iterable[KeyStoreRecord], path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    body = export_frame(records).to_csv(index=False, header=False, lineterminator="\n")
    p.write_text(EXPORT_HEADER + "\n" + body, encoding="utf-8", newline="\n")
    return p


def read_export(path: str | Path) -> list[DiagnosisKey]:
    """Parse an export file into diagnosis keys, in file order."""

    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ExportFormatError(f"cannot read {p}: {e}") from e

    header, _, body = text.partition("\n")
    if header.strip() != EXPORT_HEADER:
        raise ExportFormatError(f"{p}: expected header {EXPORT_HEADER!r}, got {header!r}")
    if not body.strip():
        return []

    df = pd.read_csv(
        StringIO(body),
        header=None,
        names=EXPORT_COLUMNS,
        dtype=str,
        keep_default_na=False,
    )
    out = []
    for n, row in enumerate(df.itertuples(index=False), start=2):
        try:
            tek = TemporaryExposureKey.from_hex(row.tek_hex, int(row.day_start))
            out.append(
                DiagnosisKey(
                    tek=tek,
                    report_type=ReportType.parse(row.report_type),
                    pha_id=row.pha_id or None,
                    region_tags=frozenset(t for t in row.region_tags.split(";") if t),
                    origin_instance=row.origin_instance or None,
                )
            )
        except ValueError as e:
            raise ExportFormatError(f"{p}:{n}: {e}") from e
    return out
