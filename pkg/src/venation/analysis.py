"""Invariant checks, Murray's law, energy dissipation and pattern metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import ModelParams, NetworkState, PrimaryModel, flux, rhs_primary
from .errors import NotApplicableError
from .grid import Graph

__all__ = [
    "MurrayReport",
    "BoundReport",
    "DissipationReport",
    "murray_residual",
    "check_bounds",
    "energy_dissipation",
    "reflection_permutation",
    "symmetry_error",
    "pattern_extent",
    "coverage_overlap",
]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Report:
    def to_dict(self):
        return _jsonable(asdict(self))


@dataclass
class MurrayReport(_Report):
    """Generalized Murray's law at a (presumed) steady state.

    ``residual`` and ``relative_residual`` are ``nan`` at skipped vertices
    (those with nonzero decay).  ``general_residual`` covers every vertex and
    includes the ``-I_i a_i`` term.  ``edge_residual`` is the relative
    violation of ``|Q|^kappa = tau X^(gamma+1)`` on active edges, ``nan``
    elsewhere.
    """

    residual: np.ndarray
    relative_residual: np.ndarray
    max_relative_residual: float
    skipped_vertices: list
    general_residual: np.ndarray
    max_general_relative_residual: float
    edge_residual: np.ndarray
    max_edge_residual: float
    active_edges: int
    steady: bool
    warnings: list = field(default_factory=list)


def murray_residual(
    g: Graph,
    p: ModelParams,
    st: NetworkState,
    *,
    edge_threshold: float = 1e-10,
    steady_tol: float = 1e-8,
) -> MurrayReport:
    """Check the generalized Murray's law.

    At every vertex with ``I_i = 0`` the residual is::

        | delta * sum_{N+(i)} (tau X^(gamma+1))^(1/kappa) + S_i
          - delta * sum_{N-(i)} (tau X^(gamma+1))^(1/kappa) |

    with ``N+(i)`` the neighbours ``j`` with ``Q_ij > 0`` and ``N-(i)`` those
    with ``Q_ij < 0``, where ``Q_ij = X_ij (a_j - a_i) / L_ij``.  The relative
    residual divides by ``delta * sum_{N(i)} (tau X^(gamma+1))^(1/kappa) +
    |S_i| + eps``.  Edges with ``X < edge_threshold * max(X)`` are treated as
    inactive and left out.
    """
    n = g.n_vertices
    S, I = p.sources(n), p.decay(n)
    Q = flux(g, st)
    X = st.X
    xmax = float(X.max()) if X.size else 0.0
    active = (X > edge_threshold * xmax) & (X > 0)
    w = np.where(active, (p.tau * np.maximum(X, 0) ** (p.gamma + 1)) ** (1.0 / p.kappa), 0.0)

    i, j = g.edges[:, 0], g.edges[:, 1]
    signed = np.zeros(n)  # sum over N+ minus sum over N-
    total = np.zeros(n)
    # from i the oriented flux is Q; from j it is -Q
    np.add.at(signed, i, np.sign(Q) * w)
    np.add.at(signed, j, -np.sign(Q) * w)
    np.add.at(total, i, w)
    np.add.at(total, j, w)
    eps = np.finfo(float).eps
    denom = p.delta * total + np.abs(S) + eps

    general = p.delta * signed + S - I * st.a
    skipped = np.flatnonzero(I != 0)
    clean = np.abs(p.delta * signed + S)
    residual = np.where(I == 0, clean, np.nan)
    rel = residual / denom
    max_rel = float(np.nanmax(rel)) if np.any(I == 0) else 0.0
    gen_rel = np.abs(general) / (denom + np.abs(I * st.a))

    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.abs(Q) ** p.kappa
        rhs = p.tau * np.maximum(X, 0) ** (p.gamma + 1)
        er = np.where(active, np.abs(lhs - rhs) / np.maximum(rhs, eps), np.nan)
    max_er = float(np.nanmax(er)) if active.any() else 0.0

    d = rhs_primary(g, p, st)
    y = np.r_[st.a, st.X]
    steady = bool(
        max(np.max(np.abs(d.a), initial=0), np.max(np.abs(d.X), initial=0))
        / max(1.0, np.max(np.abs(y), initial=0))
        < steady_tol
    )
    warn = [] if steady else ["state is not a detected steady state"]
    return MurrayReport(
        residual=residual,
        relative_residual=rel,
        max_relative_residual=max_rel,
        skipped_vertices=skipped.tolist(),
        general_residual=general,
        max_general_relative_residual=float(np.max(gen_rel)),
        edge_residual=er,
        max_edge_residual=max_er,
        active_edges=int(active.sum()),
        steady=steady,
        warnings=warn,
    )


@dataclass
class BoundReport(_Report):
    alpha: float
    max_a_over_trajectory: float
    min_a: float
    min_X: float
    bounded_check: bool
    violations: list = field(default_factory=list)
    info: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_bounds(traj, p: ModelParams, *, model: PrimaryModel | None = None,
                 g: Graph | None = None, atol: float = 0.0) -> BoundReport:
    """Check nonnegativity, positivity and the global auxin bound on a run.

    ``traj`` is a :class:`~venation.solver.SimulationResult` of the primary
    model.  Violations are ``(t, kind, index, value)`` tuples:

    * ``X < -atol`` anywhere (kind ``"X_negative"``);
    * ``a_i <= 0`` for a vertex that started positive (``"a_nonpositive"``);
    * ``a_i < -atol`` for a vertex that started at zero;
    * with ``S = 0``, ``a_i > alpha + atol`` (``"a_above_alpha"``), where
      ``alpha = sqrt(sum a_i(0)^2)``.

    Vertices that start at zero and stay there are reported in ``info``.
    """
    if model is None:
        if g is None:
            raise ValueError("pass the model or the graph")
        nv = g.n_vertices
    else:
        nv = model.nv
    A = traj.y[:, :nv]
    Xs = traj.y[:, nv:]
    a0 = A[0]
    alpha = float(np.sqrt(np.sum(a0 ** 2)))
    S = p.sources(nv)
    bounded = bool(np.all(S == 0))
    viol, info = [], []

    k, e = np.nonzero(Xs < -atol)
    viol += [(float(traj.t[kk]), "X_negative", int(ee), float(Xs[kk, ee])) for kk, ee in zip(k, e)]
    started_pos = a0 > 0
    bad = (A <= 0) & started_pos
    k, v = np.nonzero(bad)
    viol += [(float(traj.t[kk]), "a_nonpositive", int(vv), float(A[kk, vv])) for kk, vv in zip(k, v)]
    k, v = np.nonzero((A < -atol) & ~started_pos)
    viol += [(float(traj.t[kk]), "a_negative", int(vv), float(A[kk, vv])) for kk, vv in zip(k, v)]
    for vv in np.flatnonzero(~started_pos):
        if np.all(np.abs(A[:, vv]) <= atol):
            info.append(("a_stays_zero", int(vv)))
    if bounded:
        k, v = np.nonzero(A > alpha + atol)
        viol += [(float(traj.t[kk]), "a_above_alpha", int(vv), float(A[kk, vv])) for kk, vv in zip(k, v)]
    return BoundReport(
        alpha=alpha,
        max_a_over_trajectory=float(A.max()),
        min_a=float(A.min()),
        min_X=float(Xs.min()) if Xs.size else 0.0,
        bounded_check=bounded,
        violations=viol,
        info=info,
    )


@dataclass
class DissipationReport(_Report):
    energies: np.ndarray
    increments: np.ndarray
    max_increment: float
    rtol: float
    passed: bool


def energy_dissipation(traj, model, *, rtol: float = 1e-6) -> DissipationReport:
    """Energy along a Hu-Cai trajectory; passes iff no increment exceeds ``rtol*|E|``.

    ``model`` is a :class:`~venation.dynamics.HuCaiModel`.  Each snapshot's
    energy re-solves the Kirchhoff law for its conductivities.
    """
    E = np.array([model.energy(y) for y in traj.y])
    inc = np.diff(E)
    tol = rtol * np.abs(E[1:])
    passed = bool(np.all(inc <= tol))
    return DissipationReport(
        energies=E,
        increments=inc,
        max_increment=float(inc.max()) if inc.size else 0.0,
        rtol=rtol,
        passed=passed,
    )


def reflection_permutation(g: Graph, axis: str = "y", *, tol: float = 1e-9):
    """Vertex and edge permutations of the mirror image across a bbox midline.

    ``axis="y"`` reflects the ``y`` coordinate about the midpoint of the
    bounding box, i.e. mirrors the picture left-to-right; ``axis="x"``
    mirrors it top-to-bottom.  Raises :class:`NotApplicableError` when the
    graph is not invariant under the reflection.
    """
    from scipy.spatial import cKDTree

    k = {"x": 0, "y": 1}.get(axis)
    if k is None:
        raise ValueError("axis must be 'x' or 'y'")
    pos = g.positions
    lo, hi = pos[:, k].min(), pos[:, k].max()
    refl = pos.copy()
    refl[:, k] = lo + hi - pos[:, k]
    scale = max(float(np.ptp(pos, axis=0).max()), 1.0)
    dist, vperm = cKDTree(pos).query(refl)
    if np.any(dist > tol * scale) or len(set(vperm.tolist())) != g.n_vertices:
        raise NotApplicableError(f"graph is not symmetric under reflection of {axis}")
    eperm = np.empty(g.n_edges, dtype=np.int64)
    for e, (i, j) in enumerate(g.edges):
        a, b = sorted((int(vperm[i]), int(vperm[j])))
        idx = g.edge_index.get((a, b))
        if idx is None:
            raise NotApplicableError("edge set is not symmetric under the reflection")
        eperm[e] = idx
    return vperm, eperm


def symmetry_error(g: Graph, st: NetworkState, axis: str = "y") -> float:
    """``max|a - a o sigma| + max|X - X o sigma|`` for the mirror permutation sigma."""
    vperm, eperm = reflection_permutation(g, axis)
    ea = float(np.max(np.abs(st.a - st.a[vperm])))
    ex = float(np.max(np.abs(st.X - st.X[eperm]))) if g.n_edges else 0.0
    return ea + ex


def pattern_extent(st: NetworkState, threshold: float) -> int:
    """Number of edges whose transport activity exceeds ``threshold``."""
    return int(np.count_nonzero(np.asarray(st.X) > threshold))


def coverage_overlap(g: Graph, st: NetworkState, quantile: float = 0.75) -> float:
    """Jaccard index of the top-quantile vertex masks of ``a`` and of ``X``.

    ``X`` is moved to vertices by taking the largest activity among incident
    edges.
    """
    xv = np.zeros(g.n_vertices)
    np.maximum.at(xv, g.edges[:, 0], st.X)
    np.maximum.at(xv, g.edges[:, 1], st.X)
    ma = st.a >= np.quantile(st.a, quantile)
    mx = xv >= np.quantile(xv, quantile)
    union = np.count_nonzero(ma | mx)
    return float(np.count_nonzero(ma & mx) / union) if union else 1.0
