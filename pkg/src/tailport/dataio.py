"""Return panels and CSV serialization.

All CSV writers use a fixed 12-significant-digit decimal format, which keeps
write -> read -> write cycles byte-identical and the round-trip error well
below every tolerance used by the numeric layers.
"""
from __future__ import annotations

import csv
import datetime
import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError

__all__ = [
    "ReturnPanel",
    "format_value",
    "read_matrix_csv",
    "read_panel_csv",
    "read_series_csv",
    "write_matrix_csv",
    "write_panel_csv",
    "write_series_csv",
]

# %.12g prints up to 12 significant digits and strips trailing zeros, so the
# representation of a reparsed value is stable under a second write.
_FMT = "%.12g"


def format_value(x: float) -> str:
    return _FMT % float(x)


def default_timestamps(n: int, start: str = "2005-01-07") -> tuple[str, ...]:
    """Weekly ISO dates used when a caller supplies bare arrays."""
    d0 = datetime.date.fromisoformat(start)
    return tuple((d0 + datetime.timedelta(weeks=i)).isoformat() for i in range(n))


def default_asset_ids(n: int) -> tuple[str, ...]:
    return tuple(f"asset_{i + 1}" for i in range(n))


@dataclass(frozen=True)
class ReturnPanel:
    """A T x N matrix of periodic returns with row timestamps and column ids."""

    values: np.ndarray
    timestamps: tuple[str, ...]
    asset_ids: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        if values.ndim != 2:
            raise DimensionError("panel values must be a 2-D array")
        t, n = values.shape
        if len(self.timestamps) != t:
            raise DimensionError(
                f"{len(self.timestamps)} timestamps for {t} rows"
            )
        if len(self.asset_ids) != n:
            raise DimensionError(f"{len(self.asset_ids)} ids for {n} columns")
        if not np.all(np.isfinite(values)):
            raise DataError("panel contains NaN or infinite entries")
        if len(set(self.asset_ids)) != n:
            raise DataError("asset identifiers are not unique")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise DataError("timestamps must be strictly increasing")

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, timestamps=None, asset_ids=None) -> "ReturnPanel":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise DimensionError("panel values must be a 2-D array")
        t, n = values.shape
        if timestamps is None:
            timestamps = default_timestamps(t)
        if asset_ids is None:
            asset_ids = default_asset_ids(n)
        return cls(values, tuple(timestamps), tuple(asset_ids))


def write_panel_csv(panel: ReturnPanel, path) -> None:
    """Write a panel as ``date,<id>,...`` rows, one period per row."""
    with _open_out(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("date",) + panel.asset_ids)
        for ts, row in zip(panel.timestamps, panel.values):
            writer.writerow([ts] + [format_value(x) for x in row])


def read_panel_csv(path) -> ReturnPanel:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2 or rows[0][0] != "date":
        raise DataError(f"{path}: expected header starting with 'date'")
    ids = tuple(rows[0][1:])
    timestamps = []
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(ids) + 1:
            raise DataError(f"{path}:{lineno}: expected {len(ids) + 1} fields")
        timestamps.append(row[0])
        try:
            values.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return ReturnPanel(np.asarray(values, dtype=float), tuple(timestamps), ids)


def write_matrix_csv(matrix, ids, path) -> None:
    """Row-major square matrix with the identifier list as header and
    leading row-label column."""
    matrix = np.asarray(matrix, dtype=float)
    ids = tuple(ids)
    with _open_out(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("",) + ids)
        for rid, row in zip(ids, matrix):
            writer.writerow([rid] + [format_value(x) for x in row])


def read_matrix_csv(path) -> tuple[np.ndarray, tuple[str, ...]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    ids = tuple(rows[0][1:])
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(ids) + 1:
            raise DataError(f"{path}:{lineno}: expected {len(ids) + 1} fields")
        try:
            values.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    matrix = np.asarray(values, dtype=float)
    if matrix.shape != (len(ids), len(ids)):
        raise DimensionError(f"{path}: matrix is not square")
    return matrix, ids


def write_series_csv(labels, values, path, header=("id", "value")) -> None:
    """Two-column CSV used for centrality vectors, weights, and returns."""
    values = np.asarray(values, dtype=float)
    with _open_out(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for lab, val in zip(labels, values):
            writer.writerow([lab, format_value(val)])


def read_series_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a two-or-more-column CSV; values are taken from the last column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    labels = []
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        labels.append(row[0])
        try:
            values.append(float(row[-1]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return tuple(labels), np.asarray(values, dtype=float)


def _open_out(path):
    if hasattr(path, "write"):
        return _NullCtx(path)
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    return open(path, "w", newline="")


class _NullCtx:
    """Adapt an already-open stream to the ``with`` protocol without closing it."""

    def __init__(self, fh: io.TextIOBase):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        return False
