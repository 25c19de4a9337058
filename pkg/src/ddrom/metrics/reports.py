from __future__ import annotations

import csv
from collections.abc import Sequence
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, model_validator
from rich.console import Console

from ddrom.errors import DimensionMismatchError
from ddrom.fom.fields import FieldKind
from ddrom.io import dump_json
from ddrom.metrics.measures import (
    FIELDS,
    ErrorStatistics,
    GainKind,
    TrajectoryErrors,
    gain,
    statistics_summary,
    windowed,
)

Split = Literal["train", "test"]

CSV_COLUMNS = ("regime", "field", "split", "method", "value")


def regime_label(dims: Sequence[int]) -> str:
    return "-".join(str(d) for d in dims)


class ErrorReport(BaseModel):
    """Errors of one closure method for one modal regime, one entry per parameter."""

    regime: str
    method: str
    kind: GainKind
    params: list[list[float]]
    splits: list[Split]
    trajectories: list[TrajectoryErrors]
    window: tuple[float, float] | None = None

    @model_validator(mode="after")
    def _check(self) -> "ErrorReport":
        if not len(self.params) == len(self.splits) == len(self.trajectories):
            raise DimensionMismatchError("one split and one error series per parameter")
        seen: dict[tuple[float, ...], str] = {}
        for param, split in zip(self.params, self.splits):
            if seen.setdefault(tuple(param), split) != split:
                raise ValueError(f"parameter {param} appears in both splits")
        for errors in self.trajectories:
            for values in errors.errors.values():
                if any(v < 0 for v in values):
                    raise ValueError("relative errors must be non-negative")
        return self

    @property
    def fields(self) -> list[FieldKind]:
        return [f for f in FIELDS if all(f in t.errors for t in self.trajectories)]

    def series(self, field: FieldKind, indices: Sequence[int] | None = None) -> list[list[float]]:
        """Windowed per-time errors of ``field`` for the selected parameters."""
        indices = range(len(self.params)) if indices is None else indices
        return [
            windowed(self.trajectories[i].times, self.trajectories[i].errors[field], self.window)
            for i in indices
        ]

    def split_indices(self, split: Split) -> list[int]:
        return [i for i, s in enumerate(self.splits) if s == split]

    def time_averages(self, field: FieldKind) -> list[float]:
        return [float(np.mean(s)) for s in self.series(field)]

    def statistics(self, field: FieldKind, split: Split) -> ErrorStatistics | None:
        indices = self.split_indices(split)
        if not indices:
            return None
        averages = self.time_averages(field)
        return statistics_summary([averages[i] for i in indices])


class GainRow(BaseModel):
    regime: str
    field: FieldKind
    split: Split
    method: str
    value: float


class GainTable(BaseModel):
    rows: list[GainRow] = []

    @model_validator(mode="after")
    def _sorted(self) -> "GainTable":
        self.rows.sort(key=lambda r: (r.regime, r.field, r.split, r.method))
        return self

    def value(self, regime: str, field: FieldKind, split: Split, method: str) -> float:
        for row in self.rows:
            if (row.regime, row.field, row.split, row.method) == (regime, field, split, method):
                return row.value
        raise KeyError((regime, field, split, method))

    def nested(self) -> dict:
        out: dict = {}
        for row in self.rows:
            out.setdefault(row.regime, {}).setdefault(row.field, {}).setdefault(row.split, {})[
                row.method
            ] = row.value
        return out


def gain_table(
    reports: Sequence[ErrorReport], baseline: str = "none", console: Console | None = None
) -> GainTable:
    """Gains of every non-baseline method against the baseline of the same regime."""
    console = console or Console()
    by_regime: dict[str, dict[str, ErrorReport]] = {}
    for report in reports:
        by_regime.setdefault(report.regime, {})[report.method] = report

    rows = []
    for regime, methods in by_regime.items():
        base = methods.get(baseline)
        if base is None:
            console.print(f"[yellow]Regime {regime} has no {baseline} baseline; no gains[/yellow]")
            continue
        for method, report in methods.items():
            if method == baseline:
                continue
            if report.params != base.params or report.splits != base.splits:
                raise DimensionMismatchError(
                    f"{method} and {baseline} were evaluated on different parameters"
                )
            for field in (f for f in report.fields if f in base.fields):
                for split in ("train", "test"):
                    indices = report.split_indices(split)
                    if not indices:
                        continue
                    value = gain(
                        base.series(field, indices), report.series(field, indices), report.kind, console
                    )
                    rows.append(
                        GainRow(regime=regime, field=field, split=split, method=method, value=value)
                    )
    return GainTable(rows=rows)


def report_document(reports: Sequence[ErrorReport], table: GainTable) -> dict:
    errors: dict = {}
    for report in sorted(reports, key=lambda r: (r.regime, r.method)):
        fields = {}
        for field in report.fields:
            fields[field] = {
                "per_time": report.series(field),
                "time_average": report.time_averages(field),
                "projection_average": [
                    float(np.mean(windowed(t.times, t.projection[field], report.window)))
                    for t in report.trajectories
                ],
                "statistics": {
                    split: stats.model_dump()
                    for split in ("train", "test")
                    if (stats := report.statistics(field, split)) is not None
                },
            }
        errors.setdefault(report.regime, {})[report.method] = {
            "kind": report.kind,
            "params": report.params,
            "splits": report.splits,
            "window": list(report.window) if report.window else None,
            "bounds": "min/max",
            "fields": fields,
        }
    return {
        "regimes": sorted({r.regime for r in reports}),
        "gains": table.nested(),
        "errors": errors,
    }


def emit_reports(
    reports: Sequence[ErrorReport], table: GainTable, directory: str | Path
) -> tuple[Path, Path]:
    """Write ``report.json`` and ``gains.csv`` (header only when there are no gains)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / "report.json"
    json_path.write_text(dump_json(report_document(reports, table)))
    csv_path = directory / "gains.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in table.rows:
            writer.writerow([row.regime, row.field, row.split, row.method, repr(row.value)])
    return json_path, csv_path


def read_gains_csv(path: str | Path) -> GainTable:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {CSV_COLUMNS}")
        rows = [GainRow(**{**r, "value": float(r["value"])}) for r in reader]
    return GainTable(rows=rows)
