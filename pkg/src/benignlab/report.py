"""CSV/JSON rendering shared by the CLI.

Infinite values (float or the k* sentinel) render as the string ``"inf"``;
missing values as ``"n/a"``. Floats use ``repr`` so they round-trip exactly.
CSV files start with one ``#``-prefixed JSON header line.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ranks import RankProfile, is_inf


def fmt(v) -> str:
    if v is None:
        return "n/a"
    if is_inf(v):
        return "inf"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def jsonable(obj):
    """Recursively convert to JSON-safe values with the "inf" convention."""
    if is_inf(obj):
        return "inf"
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj, timestamp: bool = True) -> str:
    payload = jsonable(obj)
    if timestamp and isinstance(payload, dict):
        payload["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def csv_text(columns: list[str], rows, header: dict | None = None) -> str:
    buf = io.StringIO()
    if header is not None:
        buf.write("# " + json.dumps(jsonable(header), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def csv_body(text: str) -> str:
    """Everything after the ``#`` header line(s)."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def read_csv(text_or_path) -> tuple[dict | None, list[dict]]:
    text = Path(text_or_path).read_text() if isinstance(text_or_path, Path) else text_or_path
    lines = text.splitlines()
    header = None
    if lines and lines[0].startswith("# "):
        header = json.loads(lines[0][2:])
        lines = lines[1:]
    return header, list(csv.DictReader(lines))


def profile_csv(profile: RankProfile, extra_header: dict | None = None) -> str:
    header = {**profile.header(), **(extra_header or {}), "version": __version__}
    rows = ((k, r, R) for k, (r, R) in enumerate(zip(profile.r, profile.R)))
    return csv_text(["k", "r_k", "R_k"], rows, header)


RISK_COLUMNS = [
    "n", "p", "family", "params", "seed", "bias_term", "trace_c", "expected",
    "mc_mean", "mc_stderr", "kstar", "variance_term",
]

SCAN_COLUMNS = ["n", "r0_over_n", "kstar_over_n", "n_over_Rkstar", "mc_median", "mc_iqr", "seeds"]


def append_csv_row(path, columns: list[str], row: list) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(columns)
        w.writerow([fmt(v) for v in row])
