"""
JSON and CSV report emission.

Every JSON report carries schema_version and is written with sorted keys
and a fixed layout, so identical runs produce identical bytes.
"""

import csv
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return value.as_posix()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(payload: Dict[str, Any]) -> str:
    document = dict(payload)
    document["schema_version"] = SCHEMA_VERSION
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False, default=_to_builtin) + "\n"


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8", newline="\n")
    logger.info("📝 Wrote %s", path)
    return path


def write_csv(path: Path, rows: Iterable[Dict[str, Any]], fieldnames: Optional[Sequence[str]] = None) -> Path:
    """Write dict rows; columns follow fieldnames or the first row's key order."""
    rows: List[Dict[str, Any]] = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: "" if row.get(key) is None else _cell(row[key]) for key in fieldnames})
    logger.info("📝 Wrote %s", path)
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, (np.generic, Enum)):
        return _to_builtin(value)
    return value
