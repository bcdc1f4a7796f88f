"""encommons.utils

Public aggregate diagnostics for a Commons instance.
"""

from __future__ import annotations

__all__ = ["CommonsDiagnostics", "diagnose_commons", "records_frame"]

from collections.abc import Iterable
from dataclasses import dataclass

import pandas as pd

from encommons.commons.instance import CommonsInstance
from encommons.commons.models import KeyStoreRecord

RECORD_COLUMNS = ["seq", "day_start", "report_type", "pha_id", "origin_instance", "received_at"]


def records_frame(records: Iterable[KeyStoreRecord]) -> pd.DataFrame:
    rows = [
        (
            r.seq,
            r.diagnosis_key.tek.day_start,
            r.diagnosis_key.report_type.value,
            r.diagnosis_key.pha_id or "",
            r.origin_instance,
            r.received_at,
        )
        for r in records
    ]
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


@dataclass(frozen=True, slots=True)
class CommonsDiagnostics:
    """Counts an instance may publish without revealing any key."""

    instance_id: str
    n_records: int
    n_phas: int
    n_otas: int
    n_otas_used: int
    by_pha: pd.DataFrame
    by_origin: dict[str, int]
    day_range: tuple[int | None, int | None]
    warnings: list[str]

    def __str__(self) -> str:
        lines = [f"Commons Diagnostics: {self.instance_id}", "=" * 40]
        lines.append(f"  Records: {self.n_records:,}")
        lines.append(f"  PHAs registered: {self.n_phas}")
        lines.append(f"  OTAs: {self.n_otas} issued, {self.n_otas_used} used")
        lines.append(f"  Key days: {self.day_range[0]} to {self.day_range[1]}")

        if not self.by_pha.empty:
            lines.append("\n  Keys by PHA and report type:")
            for pha_id, row in self.by_pha.iterrows():
                counts = ", ".join(f"{col}={int(v)}" for col, v in row.items())
                lines.append(f"    {pha_id or '(none)'}: {counts}")

        if self.by_origin:
            lines.append("\n  Keys by origin instance:")
            for origin, n in sorted(self.by_origin.items()):
                lines.append(f"    {origin}: {n}")

        if self.warnings:
            lines.append("\n⚠ Warnings:")
            for w in self.warnings:
                lines.append(f"  - {w}")

        return "\n".join(lines)


def diagnose_commons(instance: CommonsInstance) -> CommonsDiagnostics:
    """Aggregate counts per PHA, report type and origin.

    Parameters
    ----------
    instance : CommonsInstance
        Instance to summarize.

    Returns
    -------
    CommonsDiagnostics
        Counts only; no key material, tokens or per-record detail.
    """

    warnings: list[str] = []
    df = records_frame(instance.records())
    state = instance.state_dict()
    otas = state["otas"]
    n_used = sum(1 for o in otas if o["used"])

    if df.empty:
        by_pha = pd.DataFrame(columns=["confirmed", "probable"])
        by_origin: dict[str, int] = {}
        day_range: tuple[int | None, int | None] = (None, None)
    else:
        by_pha = (
            df.groupby(["pha_id", "report_type"]).size().unstack(fill_value=0).sort_index()
        )
        for col in ("confirmed", "probable"):
            if col not in by_pha.columns:
                by_pha[col] = 0
        by_pha = by_pha[["confirmed", "probable"]]
        by_origin = {str(k): int(v) for k, v in df.groupby("origin_instance").size().items()}
        day_range = (int(df["day_start"].min()), int(df["day_start"].max()))

    local_phas = {p["pha_id"] for p in state["phas"]}
    local_rows = df[df["origin_instance"] == instance.instance_id] if not df.empty else df
    unknown = sorted(set(local_rows["pha_id"]) - local_phas) if not df.empty else []
    if unknown:
        warnings.append(f"local records from unregistered PHAs: {unknown}")
    if instance.pending_forwards():
        warnings.append(f"{instance.pending_forwards()} forward(s) awaiting retry")

    return CommonsDiagnostics(
        instance_id=instance.instance_id,
        n_records=len(df),
        n_phas=len(local_phas),
        n_otas=len(otas),
        n_otas_used=n_used,
        by_pha=by_pha,
        by_origin=by_origin,
        day_range=day_range,
        warnings=warnings,
    )
