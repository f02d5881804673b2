"""Snapshot and metrics serialization: CSV at full precision, binary PGM.

Density CSV: n rows from the top of the domain (j = n-1) down to the bottom,
each row the m values along x, comma separated, shortest round-trip decimal
formatting.  PGM: binary P5, maxval 255, pixel = round(255 * clamp(rho, 0, 1)),
same row order as the CSV.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatchError
from .grid import GridSpec, ScalarField

METRICS_HEADER = "step,time,total_mass,door_outflux_cum,max_density,pd_iterations,gap"


def _fmt(value):
    return repr(float(value))


def write_density_csv(field, path):
    """Write a scalar field as CSV, one row per grid row from top to bottom."""
    values = field.values
    rows = (",".join(_fmt(v) for v in values[:, j]) for j in range(field.grid.n - 1, -1, -1))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def read_density_csv(path, h=1.0):
    """Read a density CSV back into a ScalarField (inverse of the writer)."""
    with open(path, "r", encoding="ascii") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    table = [[float(part) for part in row.split(",")] for row in rows]
    n = len(table)
    m = len(table[0])
    if any(len(row) != m for row in table):
        raise ShapeMismatchError("ragged density CSV")
    values = np.empty((m, n))
    for r, row in enumerate(table):
        values[:, n - 1 - r] = row
    return ScalarField(values, GridSpec(m, n, h))


def write_metrics_csv(snapshots, path):
    """Write the per-snapshot metrics table of a run."""
    lines = [METRICS_HEADER]
    for snap in snapshots:
        met = snap.metrics
        lines.append(",".join([
            str(snap.step),
            _fmt(snap.time),
            _fmt(met["total_mass"]),
            _fmt(met["door_outflux_cum"]),
            _fmt(met["max_density"]),
            str(int(met["pd_iterations"])),
            _fmt(met["gap"]),
        ]))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_pgm(field, path):
    """Write a density field as a binary P5 image (clamped to [0, 1])."""
    values = field.values
    m, n = field.grid.m, field.grid.n
    pixels = np.rint(255.0 * np.clip(values, 0.0, 1.0)).astype(np.uint8)
    # row order matches the CSV: top row first
    raster = pixels[:, ::-1].T
    with open(path, "wb") as fh:
        fh.write(f"P5\n{m} {n}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def write_comparison_csv(report, path):
    """Write the per-step series of a two-run comparison."""
    lines = ["time,mass_a,mass_b,door_density_a,door_density_b,linf_diff,l2_diff"]
    for row in zip(report.times, report.mass_a, report.mass_b,
                   report.door_density_a, report.door_density_b,
                   report.linf_diff, report.l2_diff):
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
