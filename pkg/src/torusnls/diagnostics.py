"""Tabular diagnostics and schema-checked CSV emission.

Every experiment emits time-stamped rows under a declared column schema.
Writers refuse rows with the wrong arity or non-finite entries, so a CSV
on disk is always well-formed for the plotting layer.  Floats are
serialized with shortest round-trip repr, which makes re-runs of an
identical configuration byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path


class SchemaError(ValueError):
    """Row does not match the declared column schema."""


@dataclass
class DiagnosticSeries:
    columns: tuple[str, ...]
    rows: list[list[float]] = field(default_factory=list)

    def append(self, *values: float) -> None:
        if len(values) != len(self.columns):
            raise SchemaError(
                f"expected {len(self.columns)} values {self.columns}, got {len(values)}"
            )
        self.rows.append([float(v) for v in values])

    def column(self, name: str) -> list[float]:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def format_value(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_csv(series: DiagnosticSeries, path) -> Path:
    path = Path(path)
    lines = [",".join(series.columns)]
    for i, row in enumerate(series.rows):
        if len(row) != len(series.columns):
            raise SchemaError(f"row {i} has {len(row)} values, schema has {len(series.columns)}")
        if not all(math.isfinite(v) for v in row):
            raise SchemaError(f"row {i} contains a non-finite value: {row}")
        lines.append(",".join(format_value(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> DiagnosticSeries:
    text = Path(path).read_text().strip().splitlines()
    columns = tuple(text[0].split(","))
    series = DiagnosticSeries(columns)
    for line in text[1:]:
        series.append(*[float(v) for v in line.split(",")])
    return series
