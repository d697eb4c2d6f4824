"""CSV/JSON readers and writers for states, graphs and continuum fields.

Floats are written with 17 significant digits so files round-trip exactly
and identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import Graph

__all__ = [
    "fmt",
    "write_json",
    "read_json",
    "write_graph",
    "read_graph",
    "write_state_csv",
    "read_state_csv",
    "write_field_csv",
    "read_field_csv",
]


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_graph(path, g: Graph) -> None:
    write_json(path, g.to_dict())


def read_graph(path) -> Graph:
    return Graph.from_dict(read_json(path))


def write_state_csv(nodes_path, edges_path, g: Graph, snapshots) -> None:
    """Write ``(t, vertex_id, a)`` and ``(t, edge_i, edge_j, X)`` tables.

    ``snapshots`` is an iterable of ``(t, a, X)``.
    """
    with open(nodes_path, "w", newline="") as fn, open(edges_path, "w", newline="") as fe:
        wn, we = csv.writer(fn, lineterminator="\n"), csv.writer(fe, lineterminator="\n")
        wn.writerow(["t", "vertex_id", "a"])
        we.writerow(["t", "edge_i", "edge_j", "X"])
        for t, a, X in snapshots:
            ts = fmt(t)
            for k, v in enumerate(a):
                wn.writerow([ts, k, fmt(v)])
            for (i, j), v in zip(g.edges, X):
                we.writerow([ts, int(i), int(j), fmt(v)])


def read_state_csv(nodes_path, edges_path, g: Graph) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Inverse of :func:`write_state_csv`; maps each time to ``(a, X)``."""
    out: dict[float, list] = {}
    with open(nodes_path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            a, _ = out.setdefault(t, [np.full(g.n_vertices, np.nan), np.full(g.n_edges, np.nan)])
            a[int(row["vertex_id"])] = float(row["a"])
    with open(edges_path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            _, X = out.setdefault(t, [np.full(g.n_vertices, np.nan), np.full(g.n_edges, np.nan)])
            X[g.edge_id(int(row["edge_i"]), int(row["edge_j"]))] = float(row["X"])
    return {t: (a, X) for t, (a, X) in sorted(out.items())}


def write_field_csv(path, field, t: float) -> None:
    """Cell table ``(t, i, j, a, X1, X2)``; face tensors are averaged onto cells."""
    x1, x2 = field.cell_X()
    new = not Path(path).exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(["t", "i", "j", "a", "X1", "X2"])
        ts = fmt(t)
        nx, ny = field.grid.shape
        for i in range(nx):
            for j in range(ny):
                w.writerow([ts, i, j, fmt(field.a[i, j]), fmt(x1[i, j]), fmt(x2[i, j])])


def read_field_csv(path):
    """Return ``{t: (a, X1cell, X2cell)}`` from :func:`write_field_csv` output."""
    rows: dict[float, list] = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(float(r["t"]), []).append(r)
    out = {}
    for t, rs in rows.items():
        nx = max(int(r["i"]) for r in rs) + 1
        ny = max(int(r["j"]) for r in rs) + 1
        arr = np.zeros((3, nx, ny))
        for r in rs:
            i, j = int(r["i"]), int(r["j"])
            arr[:, i, j] = float(r["a"]), float(r["X1"]), float(r["X2"])
        out[t] = tuple(arr)
    return out
