"""Report, table and plot-series writers.  Floats carry 17 significant digits."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float) or hasattr(v, "__float__") and not isinstance(v, str):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(v)


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError("row length does not match the columns")
        self.rows.append(list(row))

    def column(self, name) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [[_jsonable(v) for v in r] for r in self.rows]}


def _jsonable(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, int):
        return v
    try:
        x = float(v)
    except (TypeError, ValueError):
        return str(v)
    return x if math.isfinite(x) else fmt(x)


def write_csv(path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([fmt(v) for v in row])


def write_series(path, x, y) -> None:
    with open(path, "w") as fh:
        for a, b in zip(x, y):
            fh.write(f"{fmt(a)} {fmt(b)}\n")


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _jsonable(obj)


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
