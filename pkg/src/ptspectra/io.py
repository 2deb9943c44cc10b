"""CSV/JSON writers for task outputs. Floats use 17 significant digits so files round-trip."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _clean(obj):
    """JSON-safe copy: complex -> [re, im], numpy scalars/arrays -> Python, non-finite -> str."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_branches(path, track) -> Path:
    rows = []
    for i, eps in enumerate(track.epsilon_grid):
        for b in track.branches:
            v = b.values[i]
            rows.append([fmt(eps), b.branch_id, fmt(v.real), fmt(v.imag), fmt(b.residuals[i]),
                         b.verdicts[i], ";".join(sorted(b.flags[i]))])
    return _write_rows(path, ["epsilon", "branch_id", "re", "im", "residual", "verdict", "flags"], rows)


def write_spectrum(path, spectrum, verdicts, errors) -> Path:
    rows = []
    for i, p in enumerate(spectrum.pairs):
        rows.append([i, fmt(p.value.real), fmt(p.value.imag), fmt(p.residual), fmt(errors[i]), verdicts[i]])
    return _write_rows(path, ["index", "re", "im", "residual", "error", "verdict"], rows)


def write_stability(path, report) -> Path:
    rows = [[fmt(r.epsilon), "" if r.rank is None else r.rank, fmt(r.proj_diff_norm), r.status]
            for r in report.rows]
    return _write_rows(path, ["epsilon", "rank", "proj_diff_norm", "verdict"], rows)


def write_numrange(path, boundary) -> Path:
    rows = [[fmt(z.real), fmt(z.imag)] for z in boundary.points]
    return _write_rows(path, ["re", "im"], rows)


def write_rspe(path, series, check) -> Path:
    out = series.to_dict()
    out["verdict"] = check.verdict
    out["tol"] = check.tol
    out["drift"] = check.drift
    out["order"] = series.order
    out["requested_order"] = series.requested_order
    return write_json(path, out)
