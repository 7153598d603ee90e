"""Snapshot writers: legacy VTK polydata and plain CSV."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import SurfaceMesh


def frame_name(step: int, ext: str = "vtk") -> str:
    return f"frame_{step:06d}.{ext}"


def _check_field(mesh, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (mesh.n_vertices,):
        raise ValueError(f"field has shape {u.shape}, expected ({mesh.n_vertices},)")
    return u


def write_vtk(mesh: SurfaceMesh, u, path, title: str = "decwave field") -> None:
    """Legacy ASCII VTK polydata with one point scalar ``u`` (9 significant digits)."""
    u = _check_field(mesh, u)
    n, f = mesh.n_vertices, mesh.n_triangles
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET POLYDATA",
        f"POINTS {n} float",
    ]
    lines += [" ".join(f"{x:.9g}" for x in p) for p in mesh.vertices]
    lines.append(f"POLYGONS {f} {4 * f}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"POINT_DATA {n}", "SCALARS u float 1", "LOOKUP_TABLE default"]
    lines += [f"{x:.9g}" for x in u]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_scalars(path) -> np.ndarray:
    """Point scalars from a file written by :func:`write_vtk`."""
    lines = Path(path).read_text().splitlines()
    start = lines.index("LOOKUP_TABLE default") + 1
    n = int(next(l for l in lines if l.startswith("POINT_DATA")).split()[1])
    return np.array([float(x) for x in lines[start:start + n]])


def write_csv(mesh: SurfaceMesh, u, path) -> None:
    """``vertex,x,y,z,u`` rows in vertex order, 17 significant digits (lossless)."""
    u = _check_field(mesh, u)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["vertex", "x", "y", "z", "u"])
        for v, (p, val) in enumerate(zip(mesh.vertices, u)):
            writer.writerow([v, *(f"{x:.17g}" for x in p), f"{val:.17g}"])


def read_csv_field(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([float(row["u"]) for row in csv.DictReader(fh)])


WRITERS = {"vtk": write_vtk, "csv": write_csv}
