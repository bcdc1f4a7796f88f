from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pandas as pd


def to_csv(obj: pd.DataFrame | pd.Series, path: str | Path, *, index: bool = False) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, pd.Series):
        obj = obj.to_frame()
    obj.to_csv(p, index=index, lineterminator="\n")
    return p


def to_json(obj: Any, path: str | Path) -> Path:
    """Write JSON with sorted keys so equal inputs give byte-identical files."""

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8", newline="\n")
    return p
