"""Time-indexed diagnostic records and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field


def fmt(x) -> str:
    """17 significant digits: round-trips a double exactly."""
    if isinstance(x, (bool,)):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class DiagnosticSeries:
    """Columns of extrema sampled at a fixed cadence, plus detected events."""

    columns: list[str]
    rows: list[list[float]] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def record(self, **values):
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"missing columns {sorted(missing)}")
        self.rows.append([float(values[c]) for c in self.columns])

    def add_event(self, name: str, t: float, **info):
        self.events.append({"event": name, "t": float(t), **info})

    def has_event(self, name: str) -> bool:
        return any(e["event"] == name for e in self.events)

    def first_event(self, name: str):
        for e in self.events:
            if e["event"] == name:
                return e
        return None

    def column(self, name: str):
        import numpy as np

        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def events_json(self) -> str:
        return json.dumps(self.events, indent=2, sort_keys=True)
