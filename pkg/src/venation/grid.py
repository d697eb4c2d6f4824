"""Embedded undirected graphs used as cell networks.

Coordinates follow the figure convention used throughout the package: the
first coordinate ``x`` runs top-to-bottom and ``y`` runs left-to-right, so a
source placed at small ``x`` sits at the top of a rendered leaf.

All builders start from the same lattice: a ``rows x cols`` array of vertices
joined by axis edges plus one diagonal per lattice cell, the diagonal
orientation alternating in a checkerboard.  ``build_diamond`` maps the lattice
onto a rhombus standing on a corner; ``build_shape`` keeps it axis-aligned and
optionally clips it to an inscribed circle or ellipse.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import InvalidGeometryError

__all__ = [
    "Graph",
    "build_diamond",
    "build_shape",
    "boundary_vertices",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected embedded graph.

    Parameters
    ----------
    positions : (N, 2) array
        Vertex coordinates ``(x, y)``.  Vertex ids are row indices.
    edges : (E, 2) int array
        Endpoint pairs.  Stored canonically with ``i < j``; rows are sorted.
    lattice : (N, 2) int array, optional
        Lattice coordinates of each vertex when the graph came from a lattice
        builder.  Used to find rim vertices.

    Edge lengths are always the Euclidean distances between endpoints.
    """

    positions: np.ndarray
    edges: np.ndarray
    lattice: np.ndarray | None = None
    lengths: np.ndarray = field(init=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        e = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        n = len(pos)
        if n < 2:
            raise InvalidGeometryError("a graph needs at least two vertices")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise InvalidGeometryError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise InvalidGeometryError("self-loops are not allowed")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
        if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
            raise InvalidGeometryError("duplicate edge")
        lengths = np.linalg.norm(pos[e[:, 1]] - pos[e[:, 0]], axis=1)
        if np.any(lengths <= 0):
            raise InvalidGeometryError("edges must have positive length")
        lat = None
        if self.lattice is not None:
            lat = np.array(self.lattice, dtype=np.int64).reshape(n, 2)
            lat.setflags(write=False)
        for arr in (pos, e, lengths):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "lattice", lat)
        ncomp, _ = connected_components(self._adjacency_matrix(), directed=False)
        if ncomp != 1:
            raise InvalidGeometryError(f"graph is not connected ({ncomp} components)")

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def _adjacency_matrix(self):
        n = len(self.positions)
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i))
        return sp.csr_matrix(
            (data, (np.r_[i, j], np.r_[j, i])), shape=(n, n)
        )

    @cached_property
    def adjacency(self) -> list[np.ndarray]:
        """Sorted neighbour ids of every vertex."""
        m = self._adjacency_matrix()
        return [np.sort(m.indices[m.indptr[k]:m.indptr[k + 1]]) for k in range(m.shape[0])]

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Signed (E, N) incidence matrix, ``(B @ a)[e] = a[j] - a[i]``."""
        ne = self.n_edges
        rows = np.repeat(np.arange(ne), 2)
        cols = self.edges.ravel()
        data = np.tile([-1.0, 1.0], ne)
        return sp.csr_matrix((data, (rows, cols)), shape=(ne, self.n_vertices))

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        """Map ``(i, j)`` with ``i < j`` to the edge row."""
        return {(int(i), int(j)): k for k, (i, j) in enumerate(self.edges)}

    def edge_id(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return self.edge_index[(i, j)]

    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.positions.min(axis=0)
        hi = self.positions.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    @classmethod
    def from_edges(cls, positions, edges, lattice=None) -> "Graph":
        return cls(np.asarray(positions, float), np.asarray(edges), lattice)

    def to_dict(self) -> dict:
        d = {
            "vertices": [
                {"id": k, "x": float(x), "y": float(y)}
                for k, (x, y) in enumerate(self.positions)
            ],
            "edges": [
                {"i": int(i), "j": int(j), "length": float(L)}
                for (i, j), L in zip(self.edges, self.lengths)
            ],
        }
        if self.lattice is not None:
            d["lattice"] = self.lattice.tolist()
        return d

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        verts = sorted(d["vertices"], key=lambda v: v["id"])
        if [v["id"] for v in verts] != list(range(len(verts))):
            raise InvalidGeometryError("vertex ids must be 0..N-1")
        pos = [(v["x"], v["y"]) for v in verts]
        edges = [(e["i"], e["j"]) for e in d["edges"]]
        return cls(np.asarray(pos, float), np.asarray(edges), d.get("lattice"))

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_dict(json.loads(text))


def _check_bbox(bbox):
    if len(bbox) != 4:
        raise InvalidGeometryError("bbox must be (xmin, xmax, ymin, ymax)")
    xmin, xmax, ymin, ymax = map(float, bbox)
    if not (np.isfinite([xmin, xmax, ymin, ymax]).all() and xmax > xmin and ymax > ymin):
        raise InvalidGeometryError(f"degenerate bbox {bbox!r}")
    return xmin, xmax, ymin, ymax


def _lattice_edges(rows: int, cols: int) -> np.ndarray:
    vid = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.c_[vid[:, :-1].ravel(), vid[:, 1:].ravel()]
    vert = np.c_[vid[:-1, :].ravel(), vid[1:, :].ravel()]
    r, c = np.meshgrid(np.arange(rows - 1), np.arange(cols - 1), indexing="ij")
    main = (r + c) % 2 == 0
    diag = np.where(
        main[..., None],
        np.stack([vid[:-1, :-1], vid[1:, 1:]], axis=-1),
        np.stack([vid[1:, :-1], vid[:-1, 1:]], axis=-1),
    ).reshape(-1, 2)
    return np.concatenate([horiz, vert, diag])


def _lattice_coords(rows, cols):
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return np.c_[r.ravel(), c.ravel()]


def build_diamond(rows: int, cols: int, bbox) -> Graph:
    """Rhombic lattice filling ``bbox`` with corners at the bbox edge midpoints.

    Lattice vertex ``(0, 0)`` is the top corner (smallest ``x``) and
    ``(rows-1, cols-1)`` the bottom corner.  Vertex count is ``rows*cols``;
    edge count is ``rows*(cols-1) + cols*(rows-1) + (rows-1)*(cols-1)``.
    """
    if rows < 2 or cols < 2:
        raise InvalidGeometryError("rows and cols must be >= 2")
    xmin, xmax, ymin, ymax = _check_bbox(bbox)
    lat = _lattice_coords(rows, cols)
    u = lat[:, 0] / (rows - 1)
    v = lat[:, 1] / (cols - 1)
    x = xmin + 0.5 * (u + v) * (xmax - xmin)
    y = ymin + 0.5 * (1.0 + v - u) * (ymax - ymin)
    return Graph(np.c_[x, y], _lattice_edges(rows, cols), lat)


def build_shape(shape: str, resolution: int, bbox) -> Graph:
    """Axis-aligned lattice over ``bbox``, clipped to ``shape``.

    ``shape`` is ``"rectangle"`` (no clipping), ``"round"`` (circle of radius
    ``min(width, height)/2`` centred in the bbox) or ``"oval"`` (the inscribed
    axis-aligned ellipse).  Only the largest connected piece survives the
    clipping; vertex ids are reassigned in row-major lattice order.
    """
    if resolution < 2:
        raise InvalidGeometryError("resolution must be >= 2")
    xmin, xmax, ymin, ymax = _check_bbox(bbox)
    n = int(resolution)
    lat = _lattice_coords(n, n)
    x = xmin + lat[:, 0] / (n - 1) * (xmax - xmin)
    y = ymin + lat[:, 1] / (n - 1) * (ymax - ymin)
    edges = _lattice_edges(n, n)
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    if shape == "rectangle":
        keep = np.ones(n * n, bool)
    elif shape in ("round", "oval"):
        rx, ry = 0.5 * (xmax - xmin), 0.5 * (ymax - ymin)
        if shape == "round":
            rx = ry = min(rx, ry)
        keep = ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 <= 1.0 + 1e-12
    else:
        raise InvalidGeometryError(f"unknown shape {shape!r}")

    edges = edges[keep[edges].all(axis=1)]
    if keep.sum() >= 2 and len(edges):
        m = sp.coo_matrix(
            (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n * n, n * n)
        )
        _, labels = connected_components(m, directed=False)
        sizes = np.bincount(labels[keep], minlength=labels.max() + 1)
        keep &= labels == np.argmax(sizes)
        edges = edges[keep[edges].all(axis=1)]
    if keep.sum() < 2:
        raise InvalidGeometryError(f"clipping to {shape!r} leaves fewer than 2 vertices")
    new_id = np.full(n * n, -1)
    new_id[keep] = np.arange(keep.sum())
    return Graph(np.c_[x, y][keep], new_id[edges], lat[keep])


def boundary_vertices(g: Graph) -> set[int]:
    """Rim vertices of a lattice graph, or convex-hull vertices otherwise.

    A lattice vertex is on the rim when any of its four axis neighbours is
    missing from the graph.
    """
    if g.lattice is not None:
        present = {tuple(rc) for rc in g.lattice.tolist()}
        rim = set()
        for k, (r, c) in enumerate(g.lattice.tolist()):
            if any(nb not in present for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))):
                rim.add(k)
        return rim
    if g.n_vertices < 3:
        return set(range(g.n_vertices))
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(g.positions)
    except QhullError:
        # collinear points: every vertex lies on the degenerate hull
        return set(range(g.n_vertices))
    return {int(v) for v in hull.vertices}
