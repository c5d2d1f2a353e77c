"""File formats: curve-matrix CSV, key-value config files, run manifests,
result tables, and ingestion of the monthly sea-surface-temperature layout.
"""

from __future__ import annotations

import csv
import json
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curves import BSplineBasis, Curve, Grid, smooth_to_curve
from .exceptions import ConfigError, IngestError


# --- curve matrix CSV: first row grid points, one curve per following row ---

def write_curve_matrix(path, curves) -> None:
    curves = list(curves)
    grid = curves[0].grid
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        # Python float repr is shortest-round-trip, so re-reading is exact
        writer.writerow(repr(float(x)) for x in grid.points)
        for c in curves:
            writer.writerow(repr(float(v)) for v in c.values)


def read_curve_matrix(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 2:
        raise IngestError(f"{path}: need a grid row and at least one curve row")
    grid = Grid(np.array([float(x) for x in rows[0]]))
    curves = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != grid.n_points:
            raise IngestError(f"{path}: row {i} has {len(row)} values, expected {grid.n_points}")
        curves.append(Curve(grid, np.array([float(x) for x in row])))
    return curves


# --- key = value config files ---

def read_config(path) -> dict:
    """Parse a flat key = value file; '#' starts a comment. Values stay
    strings; callers coerce them."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def coerce_config(raw: dict, schema: dict) -> dict:
    """Coerce string values using a {key: type} schema; unknown keys are
    rejected so typos fail loudly."""
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r}")
        typ = schema[key]
        try:
            if typ is bool:
                out[key] = value.lower() in ("1", "true", "yes", "on")
            elif typ == "int_or_none":
                out[key] = None if value.lower() in ("none", "auto") else int(value)
            else:
                out[key] = typ(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return out


# --- run manifest ---

def write_manifest(path, command: str, seed: int, config: dict) -> None:
    """Record everything needed to reproduce a run bit-exactly."""
    import shapecast

    manifest = {
        "command": command,
        "seed": seed,
        "config": {k: repr(v) if isinstance(v, float) else v for k, v in config.items()},
        "versions": {
            "shapecast": shapecast.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    Path(path).write_text(json.dumps(manifest, indent=2, default=str), encoding="utf-8")


# --- result tables ---

def write_experiment_rows(path, rows) -> None:
    """Rows: setup, parameter columns, method, then mean/sd per metric."""
    param_keys = sorted({k for r in rows for k in r.params})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["setup", *param_keys, "method", "l2_mean", "l2_sd", "fr_mean", "fr_sd", "n"]
        )
        for r in rows:
            writer.writerow(
                [r.setup, *[r.params.get(k, "") for k in param_keys], r.method,
                 f"{r.l2_mean:.6f}", f"{r.l2_sd:.6f}",
                 f"{r.fr_mean:.6f}", f"{r.fr_sd:.6f}", r.n_predictions]
            )


def write_method_summaries(path, summaries: dict) -> None:
    """Per-method mean/sd rows from a rolling or CV evaluation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "mean", "sd"])
        for method, s in summaries.items():
            writer.writerow([method, "l2", f"{s.mean_l2:.6f}", f"{s.sd_l2:.6f}"])
            writer.writerow([method, "fr", f"{s.mean_fr:.6f}", f"{s.sd_fr:.6f}"])


def write_cv_table(path, results: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["g", "l", "mean_l2", "mean_fr", "n", "skipped", "message"])
        for (g, l), cell in sorted(results.items()):
            writer.writerow(
                [g, l, f"{cell.mean_l2:.6f}", f"{cell.mean_fr:.6f}",
                 cell.n_predictions, int(cell.skipped), cell.message]
            )


# --- monthly sea-surface-temperature ingestion ---

SST_MIN, SST_MAX = 0.0, 40.0


@dataclass(frozen=True)
class SstRecord:
    year: int
    month: int
    sst: float

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise IngestError(f"month {self.month} out of range")
        if not SST_MIN <= self.sst <= SST_MAX:
            raise IngestError(
                f"temperature {self.sst} outside physical bounds "
                f"[{SST_MIN}, {SST_MAX}] for {self.year}-{self.month:02d}"
            )


def read_sst_records(path, region_column: str) -> list:
    """Parse the whitespace- or comma-delimited monthly layout: a header
    naming YR, MON and one column per region, then one row per month."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise IngestError(f"{path}: empty file")

    def tokens(line):
        return line.replace(",", " ").split()

    header = tokens(lines[0])
    upper = [h.upper() for h in header]
    try:
        year_idx = next(i for i, h in enumerate(upper) if h in ("YR", "YEAR"))
        month_idx = next(i for i, h in enumerate(upper) if h in ("MON", "MONTH"))
    except StopIteration:
        raise IngestError(f"{path}:1: header must name year and month columns")
    try:
        region_idx = next(
            i for i, h in enumerate(header) if h.upper() == region_column.upper()
        )
    except StopIteration:
        raise IngestError(
            f"{path}:1: no column named {region_column!r}; available: {header}"
        )

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        toks = tokens(line)
        if not toks:
            continue
        try:
            rec = SstRecord(
                year=int(toks[year_idx]),
                month=int(toks[month_idx]),
                sst=float(toks[region_idx]),
            )
        except (ValueError, IndexError) as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from exc
        records.append(rec)
    return records


def ingest_sst(
    path,
    region_column: str,
    year_range: tuple | None = None,
    excluded_years=(),
    n_basis: int = 11,
    grid: Grid | None = None,
):
    """Smooth each retained year's 12 monthly readings into one curve.

    Years outside ``year_range``, in ``excluded_years``, or with missing
    months are dropped (the latter with a warning). Returns
    (curves, years, warnings).
    """
    grid = grid or Grid.uniform()
    basis = BSplineBasis(n_basis=n_basis, order=4)
    records = read_sst_records(path, region_column)
    excluded = set(int(y) for y in excluded_years)

    by_year: dict = {}
    for rec in records:
        if year_range is not None and not year_range[0] <= rec.year <= year_range[1]:
            continue
        if rec.year in excluded:
            continue
        by_year.setdefault(rec.year, {})[rec.month] = rec.sst

    curves, years, warnings = [], [], []
    abscissa = (np.arange(12)) / 11.0  # months mapped onto [0, 1]
    for year in sorted(by_year):
        months = by_year[year]
        if len(months) < 12:
            warnings.append(f"year {year} dropped: only {len(months)} months present")
            continue
        ordinate = np.array([months[m] for m in range(1, 13)])
        curves.append(smooth_to_curve(abscissa, ordinate, basis, grid))
        years.append(year)
    return curves, years, warnings
