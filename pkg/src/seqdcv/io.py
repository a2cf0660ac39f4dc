"""CSV ingestion/export and deterministic report serialization.

Matrices are CSV files with a header row of column names and one row per
observation (UTF-8, '.' decimal separator).  Values are written with
``repr`` so a write/read round trip is bit-identical.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .errors import InputError

SPEC_VERSION = "1.0"
FILE_NAMES = {"X1": "X1.csv", "X2": "X2.csv", "y": "y.csv"}


@dataclass(frozen=True)
class DatasetFiles:
    x1: Path
    x2: Path
    y: Path
    log_y: bool = False


@dataclass(frozen=True)
class Table:
    values: np.ndarray
    columns: tuple[str, ...]
    path: str


@dataclass(frozen=True)
class Dataset:
    X1: np.ndarray
    X2: np.ndarray
    y: np.ndarray
    names1: tuple[str, ...]
    names2: tuple[str, ...]
    y_name: str


def _parse_cell(raw: str, path, line: int, col: int, name: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        v = math.nan
    if not math.isfinite(v):
        raise InputError(f"{path}: line {line}, column {col} ({name!r}): "
                         f"non-numeric or missing value {raw!r}")
    return v


def read_matrix(path) -> Table:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise InputError(f"cannot open {path}: {err.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        except csv.Error as err:
            raise InputError(f"{path}: line 1: {err}") from None
        header = [h.strip() for h in header]
        if not header or any(h == "" for h in header):
            raise InputError(f"{path}: line 1: header has empty column names")
        rows = []
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(c.strip() == "" for c in row):
                    continue
                if len(row) != len(header):
                    raise InputError(f"{path}: line {line}: expected {len(header)} fields, "
                                     f"found {len(row)}")
                rows.append([_parse_cell(c.strip(), path, line, k + 1, header[k])
                             for k, c in enumerate(row)])
        except csv.Error as err:
            raise InputError(f"{path}: line {reader.line_num}: {err}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    return Table(np.array(rows, dtype=np.float64), tuple(header), str(path))


def load_dataset(files: DatasetFiles) -> Dataset:
    """Read the three files; ``log_y`` takes the natural log of the outcome."""
    t1, t2, ty = read_matrix(files.x1), read_matrix(files.x2), read_matrix(files.y)
    if ty.values.shape[1] != 1:
        raise InputError(f"{ty.path}: outcome file must have exactly one column, "
                         f"found {ty.values.shape[1]}")
    n = {t.path: t.values.shape[0] for t in (t1, t2, ty)}
    if len(set(n.values())) != 1:
        raise InputError("row counts differ: " + ", ".join(f"{p} has {k}" for p, k in n.items()))
    y = ty.values[:, 0].copy()
    if files.log_y:
        if np.any(y <= 0):
            bad = int(np.flatnonzero(y <= 0)[0])
            raise InputError(f"{ty.path}: line {bad + 2}: log transform needs positive values")
        y = np.log(y)
    return Dataset(t1.values, t2.values, y, t1.columns, t2.columns, ty.columns[0])


def _fmt(v: float, precision: Optional[int]) -> str:
    return repr(float(v)) if precision is None else format(float(v), f".{precision}g")


def write_matrix(path, values, columns: Sequence[str], precision: Optional[int] = None) -> Path:
    path = Path(path)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[1] != len(columns):
        raise InputError("column names do not match the matrix width")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in values:
            w.writerow([_fmt(v, precision) for v in row])
    return path


def export_dataset(ds, directory, precision: Optional[int] = None) -> dict[str, Path]:
    """Write X1.csv, X2.csv, y.csv and truth.json for a simulated dataset."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = {
        "X1": write_matrix(d / FILE_NAMES["X1"], ds.X1,
                           [f"x1_{j + 1}" for j in range(ds.X1.shape[1])], precision),
        "X2": write_matrix(d / FILE_NAMES["X2"], ds.X2,
                           [f"x2_{j + 1}" for j in range(ds.X2.shape[1])], precision),
        "y": write_matrix(d / FILE_NAMES["y"], ds.y, ["y"], precision),
    }
    truth = {
        "spec_version": SPEC_VERSION,
        "scenario": ds.spec.to_dict(),
        "seed": list(ds.seed) if isinstance(ds.seed, tuple) else ds.seed,
        "beta1": ds.beta1, "beta2": ds.beta2, "noise": ds.noise,
    }
    out["truth"] = d / "truth.json"
    out["truth"].write_text(dumps(truth), encoding="utf-8")
    return out


def jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # str enums
        return obj.value
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def rows_to_csv(rows: Iterable[dict]) -> str:
    rows = [jsonable(r) for r in rows]
    if not rows:
        return ""
    cols = list(rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else repr(r[c]) if isinstance(r[c], float)
                    else str(r[c]) for c in cols])
    return buf.getvalue()
