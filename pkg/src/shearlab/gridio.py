"""On-disk formats: binary grids, CSV exports, atomic JSON reports.

Grid snapshots are row-major little-endian float64 with a JSON sidecar
header {"N": ..., "time": ..., "kappa": ...}; small grids can also go to
CSV.  All writes are atomic (write to a temp file in the target directory,
then rename), so partially written outputs never appear under their final
names.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .eulerian import EnergyLedger, ScalarField


def _atomic_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_text(path, text: str) -> None:
    _atomic_bytes(Path(path), text.encode("utf-8"))


def atomic_json(path, obj) -> None:
    atomic_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_coerce))


def _coerce(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if hasattr(x, "as_dict"):
        return x.as_dict()
    return str(x)


def write_grid(path, field: ScalarField, kappa: Optional[float] = None) -> None:
    """Binary grid: row-major little-endian f64 plus a JSON header sidecar."""
    path = Path(path)
    _atomic_bytes(path, field.values.astype("<f8").tobytes(order="C"))
    atomic_json(path.with_suffix(path.suffix + ".json"),
                {"N": field.n, "time": field.time, "kappa": kappa,
                 "dtype": "<f8", "order": "row-major"})


def read_grid(path) -> tuple[ScalarField, dict]:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json"), "r", encoding="utf-8") as fh:
        header = json.load(fh)
    raw = np.fromfile(path, dtype="<f8")
    n = int(header["N"])
    if raw.size != n * n:
        raise ValidationError(f"grid file {path} has {raw.size} values, expected {n*n}")
    return ScalarField(raw.reshape(n, n), float(header.get("time", 0.0))), header


def write_grid_csv(path, field: ScalarField) -> None:
    if field.n > 256:
        raise ValidationError("CSV export is for small grids (N <= 256)")
    out = []
    for row in field.values:
        out.append(",".join(f"{v:.17g}" for v in row))
    atomic_text(path, "\n".join(out) + "\n")


def write_ledger_csv(path, ledger: EnergyLedger) -> None:
    lines = ["t,l2_sq,diss_cum,grad_l2_sq"]
    for t, l2, d, g in ledger.as_rows():
        lines.append(f"{t:.17g},{l2:.17g},{d:.17g},{g:.17g}")
    atomic_text(path, "\n".join(lines) + "\n")


def write_ensemble_csv(path, positions: np.ndarray, header: dict) -> None:
    lines = ["id,x1,x2"]
    for i, (x1, x2) in enumerate(positions):
        lines.append(f"{i},{x1:.17g},{x2:.17g}")
    atomic_text(path, "\n".join(lines) + "\n")
    atomic_json(Path(path).with_suffix(".json"), header)


def write_xy_csv(path, xs, ys, names=("x", "y")) -> None:
    """Plot-data pairs for figure-style diagnostics."""
    lines = [f"{names[0]},{names[1]}"]
    for x, y in zip(xs, ys):
        lines.append(f"{x:.17g},{y:.17g}")
    atomic_text(path, "\n".join(lines) + "\n")
