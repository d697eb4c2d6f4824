import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from venation import Graph, boundary_vertices, build_diamond, build_shape
from venation.analysis import reflection_permutation
from venation.errors import InvalidGeometryError

from conftest import BASELINE_BBOX

UNIT = (0.0, 1.0, 0.0, 1.0)


def _edge_count(r, c):
    return r * (c - 1) + c * (r - 1) + (r - 1) * (c - 1)


@pytest.mark.parametrize("rows, cols, nv, ne", [(9, 9, 81, 208), (2, 2, 4, 5), (3, 3, 9, 16)])
def test_diamond_counts(rows, cols, nv, ne):
    g = build_diamond(rows, cols, BASELINE_BBOX if rows == 9 else UNIT)
    assert (g.n_vertices, g.n_edges) == (nv, ne)


@given(st.integers(2, 12), st.integers(2, 12))
@settings(max_examples=40, deadline=None)
def test_diamond_count_formula(rows, cols):
    g = build_diamond(rows, cols, UNIT)
    assert g.n_vertices == rows * cols
    assert g.n_edges == _edge_count(rows, cols)


def test_diamond_corners_at_bbox_midpoints():
    g = build_diamond(9, 9, BASELINE_BBOX)
    pos = g.positions
    assert np.allclose(pos[0], [-0.5, -0.5])  # top corner
    assert np.allclose(pos[-1], [2.0, -0.5])  # bottom corner
    # the half-plane x <= -0.4 selects only the top corner
    assert np.flatnonzero(pos[:, 0] <= -0.4).tolist() == [0]


def test_graph_invariants(diamond9):
    g = diamond9
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    assert len({tuple(e) for e in g.edges.tolist()}) == g.n_edges
    d = np.linalg.norm(g.positions[g.edges[:, 1]] - g.positions[g.edges[:, 0]], axis=1)
    assert np.allclose(g.lengths, d) and np.all(g.lengths > 0)
    A = g._adjacency_matrix()
    assert (A != A.T).nnz == 0
    for i, nb in enumerate(g.adjacency):
        for j in nb:
            assert i in g.adjacency[j]
    assert g.edge_id(5, 4) == g.edge_id(4, 5)


def test_incidence_is_gradient(diamond9):
    a = np.arange(diamond9.n_vertices, dtype=float)
    i, j = diamond9.edges.T
    assert np.allclose(diamond9.incidence @ a, a[j] - a[i])


@pytest.mark.parametrize(
    "pos, edges",
    [
        ([[0, 0]], np.zeros((0, 2))),
        ([[0, 0], [1, 0]], [[0, 0]]),
        ([[0, 0], [1, 0]], [[0, 1], [1, 0]]),
        ([[0, 0], [0, 0]], [[0, 1]]),
        ([[0, 0], [1, 0], [2, 0]], [[0, 1]]),
        ([[0, 0], [1, 0]], [[0, 2]]),
    ],
    ids=["one-vertex", "self-loop", "duplicate", "zero-length", "disconnected", "bad-id"],
)
def test_invalid_graphs(pos, edges):
    with pytest.raises(InvalidGeometryError):
        Graph(np.asarray(pos, float), np.asarray(edges))


@pytest.mark.parametrize("bbox", [(0, 0, 0, 1), (1, 0, 0, 1), (0, 1, 0, np.nan)])
def test_degenerate_bbox(bbox):
    with pytest.raises(InvalidGeometryError):
        build_diamond(3, 3, bbox)
    with pytest.raises(InvalidGeometryError):
        build_shape("round", 5, bbox)


def test_builder_argument_errors():
    with pytest.raises(InvalidGeometryError):
        build_diamond(1, 5, UNIT)
    with pytest.raises(InvalidGeometryError):
        build_shape("hexagon", 5, UNIT)
    with pytest.raises(InvalidGeometryError):
        build_shape("round", 1, UNIT)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_rectangle_unclipped(n):
    g = build_shape("rectangle", n, UNIT)
    assert g.n_vertices == n * n
    assert g.n_edges == _edge_count(n, n)


@pytest.mark.parametrize("n", [5, 9, 13, 20])
def test_round_inside_circle(n):
    g = build_shape("round", n, (-1.0, 1.0, -1.0, 1.0))
    assert np.all(np.sum(g.positions ** 2, axis=1) <= 1.0 + 1e-9)


def test_oval_inside_ellipse():
    g = build_shape("oval", 11, (-1.0, 1.0, -2.0, 2.0))
    x, y = g.positions.T
    assert np.all(x ** 2 + (y / 2) ** 2 <= 1.0 + 1e-9)


# golden values, frozen after the first reviewed run
ROUND9_UNIT_DISC = (49, 120, "b9d43ea7513da5d6c6c6613eb25f25d1ff5583c2052fa957adb36696e0125350")
SHIPPED_SHAPES = {"round": (89, 228), "oval": (113, 304)}


def test_round9_golden():
    g = build_shape("round", 9, (-1.0, 1.0, -1.0, 1.0))
    nv, ne, digest = ROUND9_UNIT_DISC
    assert (g.n_vertices, g.n_edges) == (nv, ne)
    assert hashlib.sha256(g.to_json().encode()).hexdigest() == digest


@pytest.mark.parametrize("shape", ["round", "oval"])
def test_shipped_shape_sizes(shape):
    g = build_shape(shape, 13, BASELINE_BBOX)
    assert (g.n_vertices, g.n_edges) == SHIPPED_SHAPES[shape]


@pytest.mark.parametrize("rows, expected", [(2, 4), (3, 8), (9, 32)])
def test_boundary_vertices(rows, expected):
    g = build_diamond(rows, rows, UNIT)
    rim = boundary_vertices(g)
    assert len(rim) == expected
    if rows == 3:
        assert rim == set(range(9)) - {4}


def test_boundary_without_lattice_uses_hull():
    g = Graph(np.array([[0, 0], [1, 0], [0, 1], [0.3, 0.3]], float), np.array([[0, 1], [0, 2], [0, 3], [1, 2]]))
    assert boundary_vertices(g) == {0, 1, 2}


@pytest.mark.parametrize("rows, cols", [(9, 9), (3, 3), (5, 5), (7, 7)])
def test_diamond_mirror_symmetric(rows, cols):
    g = build_diamond(rows, cols, BASELINE_BBOX)
    vperm, eperm = reflection_permutation(g, "y")
    assert sorted(vperm.tolist()) == list(range(g.n_vertices))
    assert np.allclose(g.lengths[eperm], g.lengths)
    # the top and bottom corners lie on the axis
    assert vperm[0] == 0 and vperm[-1] == g.n_vertices - 1


def test_json_roundtrip(diamond9):
    g2 = Graph.from_json(diamond9.to_json())
    assert np.array_equal(g2.positions, diamond9.positions)
    assert np.array_equal(g2.edges, diamond9.edges)
    assert np.array_equal(g2.lengths, diamond9.lengths)
    d = json.loads(diamond9.to_json())
    assert set(d["vertices"][0]) == {"id", "x", "y"}
    assert set(d["edges"][0]) == {"i", "j", "length"}


def test_builders_deterministic():
    a = build_diamond(9, 9, BASELINE_BBOX).to_json()
    b = build_diamond(9, 9, BASELINE_BBOX).to_json()
    assert a == b
    assert build_shape("oval", 13, BASELINE_BBOX).to_json() == build_shape("oval", 13, BASELINE_BBOX).to_json()


def test_edges_canonicalised():
    g = Graph(np.array([[0, 0], [1, 0], [1, 1]], float), np.array([[1, 0], [2, 1]]))
    assert g.edges.tolist() == [[0, 1], [1, 2]]
