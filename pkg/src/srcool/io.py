"""CSV and manifest emission with crash-safe writes.

Floats are rendered with repr (shortest round-trip decimal), so re-emitting
identical data yields byte-identical files.  Whole files are written to a
temp file and atomically renamed; the sweep table is the documented
exception, appended row by row to a ``.partial`` file that is renamed on
completion, so a crash preserves completed rows.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import fields

import numpy as np

from .ensemble import EnsembleSeries, FitResult, MomentumHistogram, SweepRow

__all__ = [
    "atomic_write_text",
    "fmt",
    "emit_series",
    "read_series",
    "emit_histogram",
    "read_histogram",
    "emit_fit",
    "read_fit",
    "SweepWriter",
    "read_sweep",
]

SERIES_HEADER = ["t", "p2_mean", "p2_sem", "corrE_mean", "inversion_mean"]
HIST_HEADER = ["bin_left", "bin_right", "count"]


def fmt(v) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_series(series: EnsembleSeries, path: str) -> None:
    lines = [",".join(SERIES_HEADER)]
    for i in range(series.times.size):
        lines.append(
            ",".join(
                fmt(v)
                for v in (
                    series.times[i],
                    series.p2_mean[i],
                    series.p2_sem[i],
                    series.corrE_mean[i],
                    series.inversion_mean[i],
                )
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_series(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != SERIES_HEADER:
        raise ValueError(f"{path}: not a series file (bad header)")
    if len(rows) == 1:
        raise ValueError(f"{path}: series file has no data rows")
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return {name: data[:, i] for i, name in enumerate(SERIES_HEADER)}


def emit_histogram(hist: MomentumHistogram, path: str) -> None:
    lines = [",".join(HIST_HEADER)]
    for i in range(hist.counts.size):
        lines.append(f"{fmt(hist.edges[i])},{fmt(hist.edges[i + 1])},{int(hist.counts[i])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_histogram(path: str) -> MomentumHistogram:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != HIST_HEADER:
        raise ValueError(f"{path}: not a histogram file (bad header)")
    left = np.array([float(r[0]) for r in rows[1:]])
    right = np.array([float(r[1]) for r in rows[1:]])
    counts = np.array([int(r[2]) for r in rows[1:]])
    edges = np.append(left, right[-1])
    return MomentumHistogram(edges=edges, counts=counts, total=int(counts.sum()))


FIT_HEADER = ["rate", "asymptote", "amplitude", "rms_residual", "window_lo", "window_hi"]


def emit_fit(fit: FitResult, path: str) -> None:
    vals = [fit.rate, fit.asymptote, fit.amplitude, fit.rms_residual, fit.window[0], fit.window[1]]
    atomic_write_text(
        path, ",".join(FIT_HEADER) + "\n" + ",".join(fmt(v) for v in vals) + "\n"
    )


def read_fit(path: str) -> FitResult:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if len(rows) != 2 or rows[0] != FIT_HEADER:
        raise ValueError(f"{path}: not a fit file")
    v = [float(x) for x in rows[1]]
    return FitResult(rate=v[0], asymptote=v[1], amplitude=v[2], rms_residual=v[3], window=(v[4], v[5]))


_SWEEP_FIELDS = [f.name for f in fields(SweepRow)]


class SweepWriter:
    """Incremental sweep table: rows are flushed as they complete.

    Rows accumulate in ``<path>.partial``; ``close()`` renames it into place.
    """

    def __init__(self, path: str):
        self.path = path
        self._partial = path + ".partial"
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self._f = open(self._partial, "w", newline="")
        self._f.write(",".join(_SWEEP_FIELDS) + "\n")
        self._f.flush()

    def write_row(self, row: SweepRow) -> None:
        vals = []
        for name in _SWEEP_FIELDS:
            v = getattr(row, name)
            if isinstance(v, str):
                v = v.replace("\n", " ").replace('"', "'")
                vals.append('"' + v + '"' if "," in v else v)
            else:
                vals.append(fmt(v))
        self._f.write(",".join(vals) + "\n")
        self._f.flush()
        os.fsync(self._f.fileno())

    def close(self) -> None:
        self._f.close()
        os.replace(self._partial, self.path)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self._f.close()


def read_sweep(path: str) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = []
        for rec in reader:
            out = {}
            for k, v in rec.items():
                if k in ("status", "error"):
                    out[k] = v
                elif k in ("n_traj",):
                    out[k] = int(v)
                else:
                    out[k] = float(v) if v != "" else math.nan
            rows.append(out)
    return rows
