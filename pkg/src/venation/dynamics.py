"""Right-hand sides of the three network models.

* primary: auxin ``a`` on vertices, symmetric transport activity ``X`` on
  edges, with flux feedback ``|Q|^kappa``;
* Hu-Cai: conductivities ``C`` adapted by the energy gradient flow, pressures
  from the Kirchhoff law;
* Mitchison: signal ``s`` on vertices, diffusion constants ``D`` updated
  from the oriented Fick flux.

Edge quantities are stored once per undirected edge in the graph's canonical
``(i, j), i < j`` orientation.  Oriented fluxes are reported in that
orientation; the reverse orientation is their negative.

The transport update divides by ``X^(gamma+1)`` and multiplies by ``X``.  We
evaluate it as ``(|da|/L)^kappa * X^(kappa-gamma)`` which agrees for
``X > 0`` and extends continuously by zero at ``X = 0`` when
``kappa > gamma``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, SingularRHSError, WellPosednessWarning
from .grid import Graph
from .solver.kirchhoff import kirchhoff_solve

__all__ = [
    "NetworkState",
    "HuCaiState",
    "MitchisonState",
    "ModelParams",
    "flux",
    "rhs_primary",
    "rhs_hu_cai",
    "rhs_mitchison",
    "energy",
    "PrimaryModel",
    "HuCaiModel",
    "MitchisonModel",
]


@dataclass
class NetworkState:
    a: np.ndarray
    X: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.a = np.asarray(self.a, float)
        self.X = np.asarray(self.X, float)


@dataclass
class HuCaiState:
    C: np.ndarray
    P: np.ndarray | None = None
    t: float = 0.0


@dataclass
class MitchisonState:
    s: np.ndarray
    D: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.s = np.asarray(self.s, float)
        self.D = np.asarray(self.D, float)


@dataclass
class ModelParams:
    """Scalar constants and static per-vertex fields of the network models.

    ``S`` and ``I`` are per-vertex source and decay fields (``None`` means
    zero).  In Hu-Cai and Mitchison mode ``S`` is a signed source/sink field.
    ``nu`` defaults to ``tau**2``, the value for which the Hu-Cai update is a
    gradient flow of :func:`energy`.  ``wall_area`` is a scalar or per-edge
    array; ``mitchison_rate`` is the relaxation rate of the Mitchison
    diffusion-constant update.
    """

    delta: float = 1.0
    sigma: float = 1.0
    kappa: float = 2.0
    gamma: float = 0.5
    tau: float = 1.0
    nu: float | None = None
    bigD2: float = 0.0
    cell_volume: float = 1.0
    wall_area: float | np.ndarray = 1.0
    mitchison_rate: float = 1.0
    S: np.ndarray | None = field(default=None, repr=False)
    I: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        for name in ("sigma", "kappa", "tau", "bigD2", "mitchison_rate"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.cell_volume > 0:
            raise ValueError("cell_volume must be positive")
        if np.any(np.asarray(self.wall_area) <= 0):
            raise ValueError("wall areas must be positive")
        if self.nu is not None and not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.I is not None and np.any(np.asarray(self.I) < 0):
            raise ValueError("decay rates I must be nonnegative")

    @property
    def metabolic(self) -> float:
        return self.tau ** 2 if self.nu is None else self.nu

    def sources(self, n: int) -> np.ndarray:
        return _field(self.S, n, "S")

    def decay(self, n: int) -> np.ndarray:
        return _field(self.I, n, "I")

    def check_primary(self) -> None:
        """Warn when ``kappa - gamma`` leaves ``(0, 1]``."""
        gap = self.kappa - self.gamma
        if gap <= 0:
            warnings.warn(
                f"kappa - gamma = {gap:g} <= 0: zero transport activity is not absorbing",
                WellPosednessWarning,
                stacklevel=2,
            )
        elif gap > 1:
            warnings.warn(
                f"kappa - gamma = {gap:g} > 1: outside the global-existence range 0 < kappa - gamma <= 1",
                WellPosednessWarning,
                stacklevel=2,
            )


def _field(v, n, name):
    if v is None:
        return np.zeros(n)
    arr = np.broadcast_to(np.asarray(v, float), (n,)) if np.ndim(v) == 0 else np.asarray(v, float)
    if arr.shape != (n,):
        raise DimensionError(f"{name} has shape {arr.shape}, expected ({n},)")
    return np.array(arr)


def _check(g: Graph, nv=None, ne=None):
    if nv is not None and np.shape(nv) != (g.n_vertices,):
        raise DimensionError(f"vertex field has shape {np.shape(nv)}, expected ({g.n_vertices},)")
    if ne is not None and np.shape(ne) != (g.n_edges,):
        raise DimensionError(f"edge field has shape {np.shape(ne)}, expected ({g.n_edges},)")


def _gradient(g: Graph, a):
    """``(a_j - a_i) / L_ij`` per edge."""
    return (a[g.edges[:, 1]] - a[g.edges[:, 0]]) / g.lengths


def _feedback(grad, X, kappa, gamma):
    """``|grad|^kappa * X^(kappa-gamma)`` with the zero-activity extension."""
    Xp = np.maximum(X, 0.0)
    p = kappa - gamma
    if p <= 0 and np.any(Xp == 0):
        raise SingularRHSError(
            f"kappa - gamma = {p:g} <= 0 with zero transport activity on an edge"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(grad) ** kappa * Xp ** p
    return np.where(Xp > 0, out, 0.0)


def flux(g: Graph, st: NetworkState) -> np.ndarray:
    """Oriented auxin flow rate ``Q_ij = X_ij (a_j - a_i) / L_ij``."""
    _check(g, st.a, st.X)
    return st.X * _gradient(g, st.a)


def _divergence(g: Graph, q):
    """Per-vertex ``sum_j q_ij`` over incident edges, oriented away from the vertex."""
    out = np.zeros(g.n_vertices)
    np.add.at(out, g.edges[:, 0], q)
    np.add.at(out, g.edges[:, 1], -q)
    return out


def rhs_primary(g: Graph, p: ModelParams, st: NetworkState) -> NetworkState:
    """Time derivative of ``(a, X)`` for the primary model."""
    _check(g, st.a, st.X)
    grad = _gradient(g, st.a)
    S, I = p.sources(g.n_vertices), p.decay(g.n_vertices)
    da = S - I * st.a + p.delta * _divergence(g, st.X * grad)
    fb = _feedback(grad, st.X, p.kappa, p.gamma)
    dX = p.sigma * g.lengths * (fb - p.tau * st.X)
    return NetworkState(da, dX, st.t)


def rhs_hu_cai(g: Graph, p: ModelParams, C, P) -> np.ndarray:
    """``dC/dt`` of the Hu-Cai gradient flow for given Kirchhoff pressures ``P``."""
    C = np.asarray(C, float)
    P = np.asarray(P, float)
    _check(g, P, C)
    grad = _gradient(g, P)
    fb = _feedback(grad, C, 2.0, p.gamma)
    return p.sigma * g.lengths * (fb - p.tau ** 2 * C)


def _mitchison_phi(g, st):
    # Fick flux from i to j in the stored orientation
    return st.D * (st.s[g.edges[:, 0]] - st.s[g.edges[:, 1]]) / g.lengths


def rhs_mitchison(g: Graph, p: ModelParams, st: MitchisonState) -> MitchisonState:
    """Signal and diffusion-constant derivatives of the Mitchison model.

    The update of ``D`` relaxes towards ``max(phi, 0)^2`` at rate
    ``p.mitchison_rate``, with ``phi`` the flux in the stored orientation.
    """
    _check(g, st.s, st.D)
    phi = _mitchison_phi(g, st)
    A = np.broadcast_to(np.asarray(p.wall_area, float), (g.n_edges,))
    ds = p.sources(g.n_vertices) - _divergence(g, A * phi) / p.cell_volume
    dD = p.mitchison_rate * (np.maximum(phi, 0.0) ** 2 - st.D)
    return MitchisonState(ds, dD, st.t)


def energy(g: Graph, p: ModelParams, C, Q) -> float:
    """Pumping power plus metabolic cost, ``sum (Q^2/C + nu/gamma C^gamma) L``.

    Returns ``inf`` when an edge carries flux with zero conductivity.
    """
    C = np.asarray(C, float)
    Q = np.asarray(Q, float)
    _check(g, None, C)
    _check(g, None, Q)
    if np.any((C == 0) & (Q != 0)):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        pump = np.where(C > 0, Q ** 2 / C, 0.0)
    return float(np.sum((pump + p.metabolic / p.gamma * C ** p.gamma) * g.lengths))


class PrimaryModel:
    """Flat-vector view ``y = [a, X]`` of the primary model for the integrator."""

    def __init__(self, g: Graph, p: ModelParams):
        self.g, self.p = g, p
        self.nv, self.ne = g.n_vertices, g.n_edges
        self.S = p.sources(self.nv)
        self.I = p.decay(self.nv)
        if np.any(self.S < 0):
            raise ValueError("primary-model sources must be nonnegative")
        p.check_primary()
        self.nonneg = np.ones(self.nv + self.ne, bool)
        self.freeze = np.r_[np.zeros(self.nv, bool), np.ones(self.ne, bool)]
        self.positive = np.r_[np.ones(self.nv, bool), np.zeros(self.ne, bool)]

    @property
    def size(self):
        return self.nv + self.ne

    def pack(self, st: NetworkState) -> np.ndarray:
        _check(self.g, st.a, st.X)
        return np.r_[st.a, st.X]

    def unpack(self, y, t=0.0) -> NetworkState:
        return NetworkState(y[: self.nv].copy(), y[self.nv:].copy(), float(t))

    def rhs(self, t, y):
        st = rhs_primary(self.g, self.p, self.unpack(y, t))
        return np.r_[st.a, st.X]

    def jac(self, t, y):
        g, p = self.g, self.p
        a, X = y[: self.nv], y[self.nv:]
        B = g.incidence
        L = g.lengths
        grad = _gradient(g, a)
        Xp = np.maximum(X, 0.0)
        # da/da = -diag(I) - delta * B^T diag(X/L) B ; da/dX = -delta * B^T diag(grad)
        Jaa = -sp.diags(self.I) - p.delta * (B.T @ sp.diags(X / L) @ B)
        JaX = -p.delta * (B.T @ sp.diags(grad))
        k, q = p.kappa, p.kappa - p.gamma
        absg = np.abs(grad)
        with np.errstate(divide="ignore", invalid="ignore"):
            dg = np.where(absg > 0, k * absg ** (k - 1) * np.sign(grad), 0.0) * Xp ** q
            dx = np.where(Xp > 0, q * absg ** k * Xp ** (q - 1), 0.0)
        dg = np.where(np.isfinite(dg), dg, 0.0)
        dx = np.where(np.isfinite(dx), dx, 0.0)
        JXa = sp.diags(p.sigma * dg) @ B
        JXX = sp.diags(p.sigma * L * (dx - p.tau))
        return sp.bmat([[Jaa, JaX], [JXa, JXX]], format="csc")


class HuCaiModel:
    """Flat-vector view ``y = C`` of the Hu-Cai model.

    Every rhs evaluation re-solves the Kirchhoff law; the largest relative
    Kirchhoff residual seen is tracked in ``max_kirchhoff_residual``.
    """

    def __init__(self, g: Graph, p: ModelParams):
        self.g, self.p = g, p
        self.S = p.sources(g.n_vertices)
        self.nonneg = np.ones(g.n_edges, bool)
        self.freeze = np.ones(g.n_edges, bool)
        # C decays exponentially but never reaches zero; keep it resolved so
        # the positive-conductivity graph stays connected
        self.positive = np.ones(g.n_edges, bool)
        self.max_kirchhoff_residual = 0.0
        self.n_kirchhoff = 0
        # fail early on unbalanced sources
        kirchhoff_solve(g, np.ones(g.n_edges), self.S)

    @property
    def size(self):
        return self.g.n_edges

    def pressures(self, C):
        P = kirchhoff_solve(self.g, np.maximum(C, 0.0), self.S)
        from .solver.kirchhoff import kirchhoff_residual

        snorm = np.linalg.norm(self.S)
        if snorm > 0:
            r = np.linalg.norm(kirchhoff_residual(self.g, np.maximum(C, 0.0), P, self.S)) / snorm
            self.max_kirchhoff_residual = max(self.max_kirchhoff_residual, r)
        self.n_kirchhoff += 1
        return P

    def flow(self, C):
        C = np.asarray(C, float)
        return C * _gradient(self.g, self.pressures(C))

    def energy(self, C):
        return energy(self.g, self.p, C, self.flow(C))

    def pack(self, st: HuCaiState):
        return np.asarray(st.C, float).copy()

    def unpack(self, y, t=0.0) -> HuCaiState:
        return HuCaiState(y.copy(), self.pressures(y), float(t))

    def rhs(self, t, y):
        return rhs_hu_cai(self.g, self.p, y, self.pressures(y))

    jac = None


class MitchisonModel:
    """Flat-vector view ``y = [s, D]`` of the Mitchison model."""

    def __init__(self, g: Graph, p: ModelParams):
        self.g, self.p = g, p
        self.nv, self.ne = g.n_vertices, g.n_edges
        self.nonneg = np.r_[np.zeros(self.nv, bool), np.ones(self.ne, bool)]
        self.freeze = np.zeros(self.nv + self.ne, bool)

    @property
    def size(self):
        return self.nv + self.ne

    def pack(self, st: MitchisonState):
        return np.r_[st.s, st.D]

    def unpack(self, y, t=0.0) -> MitchisonState:
        return MitchisonState(y[: self.nv].copy(), y[self.nv:].copy(), float(t))

    def rhs(self, t, y):
        st = rhs_mitchison(self.g, self.p, self.unpack(y, t))
        return np.r_[st.s, st.D]

    def jac(self, t, y):
        g, p = self.g, self.p
        s, D = y[: self.nv], y[self.nv:]
        B = g.incidence
        L = g.lengths
        A = np.broadcast_to(np.asarray(p.wall_area, float), (self.ne,))
        Bs = B @ s  # s_j - s_i
        phi = -D * Bs / L
        # phi = -diag(D/L) B s ; ds = sigma + B^T (A phi) / v
        dphi_ds = -(sp.diags(D / L) @ B)
        dphi_dD = sp.diags(-Bs / L)
        Jss = B.T @ sp.diags(A / p.cell_volume) @ dphi_ds
        JsD = B.T @ sp.diags(A / p.cell_volume) @ dphi_dD
        pos = np.maximum(phi, 0.0)
        JDs = sp.diags(2 * p.mitchison_rate * pos) @ dphi_ds
        JDD = sp.diags(2 * p.mitchison_rate * pos * (-Bs / L) - p.mitchison_rate)
        return sp.bmat([[Jss, JsD], [JDs, JDD]], format="csc")
