"""On-disk formats: snapshot CSV, trajectory directory, report JSON/CSV.

All CSV bodies are deterministic: comma separated, header rows, floats at 17
significant digits with a "." decimal point regardless of locale.  Wall-clock
information lives only in trajectory manifests, never in CSV bodies, so
reruns with the same inputs produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .propagation import TimeGrid
from .solver import Trajectory
from .spectral import FieldSnapshot, ModeArray, SpectralGrid

NODE_FILE_FORMAT = "node_{:05d}.csv"


def format_float(x: float) -> str:
    return f"{x:.16e}"


def write_snapshot(path, snap: FieldSnapshot) -> None:
    """Columnar snapshot file: grid header, then one row per mode index.

    Only one-dimensional grids serialize; the header carries no dimension
    field and the k column is a single signed integer.
    """
    grid = snap.grid
    if grid.dim != 1:
        raise ValueError("snapshot files are defined for one-dimensional grids")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["L", "Nx", "m", "q", "time"])
        writer.writerow(
            [
                format_float(grid.extent),
                grid.modes,
                format_float(grid.mass),
                grid.sobolev_q,
                format_float(snap.time),
            ]
        )
        writer.writerow(["k", "re_phi", "im_phi", "re_pi", "im_pi"])
        for i in range(grid.modes):
            p = snap.phi.values[i]
            v = snap.pi.values[i]
            writer.writerow(
                [
                    int(grid.mode_index[i]),
                    format_float(p.real),
                    format_float(p.imag),
                    format_float(v.real),
                    format_float(v.imag),
                ]
            )


def read_snapshot(path) -> FieldSnapshot:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, values = rows[0], rows[1]
    if header != ["L", "Nx", "m", "q", "time"]:
        raise ValueError(f"unrecognized snapshot header in {path}")
    grid = SpectralGrid(
        dim=1,
        extent=float(values[0]),
        modes=int(values[1]),
        mass=float(values[2]),
        sobolev_q=int(values[3]),
    )
    time = float(values[4])
    phi = np.zeros(grid.shape, dtype=complex)
    pi = np.zeros(grid.shape, dtype=complex)
    for row in rows[3:]:
        i = int(row[0]) % grid.modes
        phi[i] = complex(float(row[1]), float(row[2]))
        pi[i] = complex(float(row[3]), float(row[4]))
    return FieldSnapshot(time, ModeArray(grid, phi), ModeArray(grid, pi))


def write_trajectory(directory, traj: Trajectory, manifest_extra: dict | None = None) -> None:
    """Per-node snapshot files plus a JSON manifest describing the run."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for j, snap in enumerate(traj.snapshots):
        write_snapshot(directory / NODE_FILE_FORMAT.format(j), snap)
    grid = traj.grid
    manifest = {
        "grid": {
            "dim": grid.dim,
            "extent": grid.extent,
            "modes": grid.modes,
            "mass": grid.mass,
            "sobolev_q": grid.sobolev_q,
        },
        "time": {"horizon": traj.tgrid.horizon, "nt": traj.tgrid.nt},
        "coupling": traj.coupling,
        "solver": dict(traj.meta),
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_trajectory(directory) -> Trajectory:
    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    tgrid = TimeGrid(manifest["time"]["horizon"], manifest["time"]["nt"])
    snapshots = tuple(
        read_snapshot(directory / NODE_FILE_FORMAT.format(j)) for j in range(tgrid.nnodes)
    )
    return Trajectory(tgrid, snapshots, manifest["coupling"], manifest.get("solver", {}))


def report_to_dict(report) -> dict:
    return {
        "s": report.s,
        "coupling": report.coupling,
        "per_order": [list(term) for term in report.per_order],
        "partial_sums": report.partial_sums,
        "target": report.target,
        "residuals": report.residuals,
        "radius_bound": report.radius_bound,
        "condition_ok": report.condition_ok,
        "c_q": report.c_q,
        "window": report.window,
        "phi_e_norm": report.phi_e_norm,
        "meta": report.meta,
    }


def write_report_json(path, report) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(path, report) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["order", "tree_count", "order_sum", "partial_sum", "residual"])
        for term, partial in zip(report.per_order, report.partial_sums):
            residual = ""
            if report.residuals is not None:
                residual = format_float(report.residuals[term.order])
            writer.writerow(
                [
                    term.order,
                    term.tree_count,
                    format_float(term.order_sum),
                    format_float(partial),
                    residual,
                ]
            )
