import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from core.errors import InputError

log = logging.getLogger(__name__)

PROVENANCE = ("config_hash", "geometry_hash", "seed")


def plain(value: Any) -> Any:
    """JSON-ready copy: numpy scalars and arrays become Python values, tuples become lists."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    return value


def _cell(value: Any) -> str:
    value = plain(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return "" if value is None else str(value)


def write_csv(path: Path, rows: Sequence[Mapping[str, Any]], provenance: Mapping[str, Any]) -> Path:
    """Rows in order, provenance columns first, other columns sorted; floats written with repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = sorted({k for row in rows for k in row} - set(PROVENANCE))
    header = list(PROVENANCE) + keys
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        merged = {**row, **{k: provenance.get(k) for k in PROVENANCE}}
        writer.writerow([_cell(merged.get(k)) for k in header])
    path.write_text(buf.getvalue(), encoding="utf-8")
    log.debug("wrote %s (%d rows)", path, len(rows))
    return path


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plain(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.debug("wrote %s", path)
    return path


def read_json(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"report not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"malformed report {path}: {e}") from None


def _flatten(prefix: str, value: Any, out: Dict[str, Any]):
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    else:
        out[prefix] = value


def _as_number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if value in ("inf", "-inf", "nan"):
        return float(value)
    return None


def report_diff(old: Mapping[str, Any], new: Mapping[str, Any], rtol: float = 0.0) -> Dict[str, Any]:
    """Compare the scalars and verdicts of two reports.

    A scalar that differs by more than ``rtol`` relative to the larger value
    is listed as changed.  Only verdicts that flipped from pass to fail are
    regressions.
    """
    a, b = {}, {}
    _flatten("", {"scalars": old.get("scalars", {}), "verdicts": old.get("verdicts", {})}, a)
    _flatten("", {"scalars": new.get("scalars", {}), "verdicts": new.get("verdicts", {})}, b)
    changed: List[Dict[str, Any]] = []
    for key in sorted(set(a) | set(b)):
        va, vb = a.get(key), b.get(key)
        na, nb = _as_number(va), _as_number(vb)
        if na is not None and nb is not None:
            same = (na == nb or (math.isnan(na) and math.isnan(nb))
                    or abs(na - nb) <= rtol * max(abs(na), abs(nb)))
        else:
            same = va == vb
        if not same:
            changed.append({"key": key, "old": va, "new": vb})
    flipped = [c["key"] for c in changed if c["key"].startswith("verdicts.") and c["old"] is True and c["new"] is not True]
    return {
        "same_config": old.get("config_hash") == new.get("config_hash"),
        "changed": changed,
        "regressions": flipped,
        "identical": not changed,
    }


def collect_reports(root: Path, names: Iterable[str]) -> Dict[str, Dict[str, Any]]:
    """Load ``<root>/<name>/report.json`` for every name that has one."""
    found = {}
    for name in names:
        path = Path(root) / name / "report.json"
        if path.exists():
            found[name] = read_json(path)
    return found
