"""Macroscopic limit on a rectangular tensor grid.

Auxin ``a`` lives at cell centres of an ``nx x ny`` grid.  The diagonal
transport tensor is stored staggered: ``X1`` on the interior faces normal to
``x`` (shape ``(nx-1, ny)``) and ``X2`` on the interior faces normal to ``y``
(shape ``(nx, ny-1)``).  Boundary faces carry no auxin flux, which is the
discrete no-flux condition, so ``X`` is never needed there.

With this layout the elliptic operator ``-delta div(X grad a)`` is exactly the
graph operator of the discrete model on the lattice of cell centres, with each
edge sum divided once more by the spacing along that edge.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceError,
    DegenerateOperatorError,
    DimensionError,
    StepRejected,
    WellPosednessWarning,
)

__all__ = [
    "ContinuumGrid",
    "ContinuumField",
    "ContinuumParams",
    "ContinuumResult",
    "PLaplacianResult",
    "solve_elliptic",
    "step_transport",
    "run_continuum",
    "p_laplacian_steady",
    "p_laplacian_energy",
    "with_point_source",
]


@dataclass(frozen=True)
class ContinuumGrid:
    bbox: tuple
    nx: int
    ny: int

    def __post_init__(self):
        x0, x1, y0, y1 = map(float, self.bbox)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate domain {self.bbox!r}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need at least 2 cells per direction")
        object.__setattr__(self, "bbox", (x0, x1, y0, y1))

    @property
    def h1(self) -> float:
        return (self.bbox[1] - self.bbox[0]) / self.nx

    @property
    def h2(self) -> float:
        return (self.bbox[3] - self.bbox[2]) / self.ny

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    @property
    def shape(self):
        return (self.nx, self.ny)

    def centers(self):
        """Cell-centre coordinate arrays ``(x, y)``, each of shape ``(nx, ny)``."""
        x = self.bbox[0] + (np.arange(self.nx) + 0.5) * self.h1
        y = self.bbox[2] + (np.arange(self.ny) + 0.5) * self.h2
        return np.meshgrid(x, y, indexing="ij")

    def face_centers(self, k: int):
        x, y = self.centers()
        if k == 0:
            return 0.5 * (x[1:] + x[:-1]), y[1:]
        return x[:, 1:], 0.5 * (y[:, 1:] + y[:, :-1])

    def to_dict(self):
        return {"bbox": list(self.bbox), "nx": self.nx, "ny": self.ny,
                "h1": self.h1, "h2": self.h2}

    # difference operators, cached per grid
    def _diff(self):
        cache = self.__dict__.get("_ops")
        if cache is None:
            nx, ny = self.nx, self.ny
            dx = sp.diags([-np.ones(nx - 1), np.ones(nx - 1)], [0, 1], shape=(nx - 1, nx))
            dy = sp.diags([-np.ones(ny - 1), np.ones(ny - 1)], [0, 1], shape=(ny - 1, ny))
            Dx = (sp.kron(dx, sp.identity(ny)) / self.h1).tocsr()
            Dy = (sp.kron(sp.identity(nx), dy) / self.h2).tocsr()
            cache = (Dx, Dy)
            object.__setattr__(self, "_ops", cache)
        return cache

    @property
    def Dx(self):
        """Forward difference from cells to x-faces, ``(nx-1)*ny x nx*ny``."""
        return self._diff()[0]

    @property
    def Dy(self):
        return self._diff()[1]


def _neumann_laplacian(m, n, h1, h2):
    """Cell-centred 5-point Laplacian with zero-flux walls on an ``m x n`` array."""
    def lap1(k, h):
        if k < 2:
            return sp.csr_matrix((k, k))
        d = sp.diags([-np.ones(k - 1), np.ones(k - 1)], [0, 1], shape=(k - 1, k))
        return -(d.T @ d) / h ** 2

    return (sp.kron(lap1(m, h1), sp.identity(n)) + sp.kron(sp.identity(m), lap1(n, h2))).tocsr()


@lru_cache(maxsize=32)
def _diffusion_lu(m, n, h1, h2, h, tau, D2):
    M = (1 + h * tau) * sp.identity(m * n) - h * D2 * _neumann_laplacian(m, n, h1, h2)
    return spla.splu(M.tocsc())


@dataclass
class ContinuumField:
    grid: ContinuumGrid
    a: np.ndarray
    X1: np.ndarray
    X2: np.ndarray

    def __post_init__(self):
        g = self.grid
        self.a = np.asarray(self.a, float)
        self.X1 = np.asarray(self.X1, float)
        self.X2 = np.asarray(self.X2, float)
        if self.a.shape != g.shape:
            raise DimensionError(f"a has shape {self.a.shape}, expected {g.shape}")
        if self.X1.shape != (g.nx - 1, g.ny) or self.X2.shape != (g.nx, g.ny - 1):
            raise DimensionError("X1/X2 must live on interior x-/y-faces")
        if np.any(self.X1 < 0) or np.any(self.X2 < 0):
            raise ValueError("transport tensor must be nonnegative")

    @classmethod
    def constant(cls, grid: ContinuumGrid, X: float = 1.0, a: float = 0.0):
        return cls(
            grid,
            np.full(grid.shape, float(a)),
            np.full((grid.nx - 1, grid.ny), float(X)),
            np.full((grid.nx, grid.ny - 1), float(X)),
        )

    def min_X(self) -> float:
        return float(min(self.X1.min(), self.X2.min()))

    def cell_X(self):
        """Face values averaged onto cells (one-sided next to the walls)."""
        g = self.grid
        x1 = np.zeros(g.shape)
        c1 = np.zeros(g.shape)
        x1[1:] += self.X1
        x1[:-1] += self.X1
        c1[1:] += 1
        c1[:-1] += 1
        x2 = np.zeros(g.shape)
        c2 = np.zeros(g.shape)
        x2[:, 1:] += self.X2
        x2[:, :-1] += self.X2
        c2[:, 1:] += 1
        c2[:, :-1] += 1
        return x1 / c1, x2 / c2

    def copy(self):
        return ContinuumField(self.grid, self.a.copy(), self.X1.copy(), self.X2.copy())


@dataclass
class ContinuumParams:
    """Constants of the continuum system.

    ``S`` and ``I`` are scalars or cell arrays.  The elliptic problem needs
    ``I >= I_min > 0`` everywhere.
    """

    delta: float = 1.0
    kappa: float = 2.0
    gamma: float = 0.5
    tau: float = 1.0
    bigD2: float = 1e-3
    S: float | np.ndarray = 0.0
    I: float | np.ndarray = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not (self.kappa >= 0 and self.gamma > 0 and self.tau >= 0 and self.bigD2 >= 0):
            raise ValueError("need kappa >= 0, gamma > 0, tau >= 0, bigD2 >= 0")

    def fields(self, grid: ContinuumGrid):
        S = np.broadcast_to(np.asarray(self.S, float), grid.shape).copy()
        I = np.broadcast_to(np.asarray(self.I, float), grid.shape).copy()
        return S, I

    def check_range(self, d: int = 2) -> None:
        """Warn when ``(kappa, gamma)`` is outside the weak-existence window."""
        upper = (self.gamma + 4) / 3 if d <= 2 else (self.gamma + 5) / 4
        if not (self.gamma < self.kappa < upper):
            warnings.warn(
                f"kappa={self.kappa:g}, gamma={self.gamma:g} outside gamma < kappa < {upper:g}",
                WellPosednessWarning,
                stacklevel=2,
            )


def _elliptic_matrix(grid, X1, X2, delta, I):
    Dx, Dy = grid.Dx, grid.Dy
    return (
        delta * (Dx.T @ sp.diags(X1.ravel()) @ Dx + Dy.T @ sp.diags(X2.ravel()) @ Dy)
        + sp.diags(I.ravel())
    ).tocsc()


def solve_elliptic(f: ContinuumField, p: ContinuumParams, *, rtol: float = 1e-10,
                   x_floor: float = 0.0) -> np.ndarray:
    """Solve ``-delta div(X grad a) = S - I a`` with no-flux walls.

    Finite volumes on the staggered grid; second order for smooth data.
    Returns ``a`` with shape ``(nx, ny)``.

    Raises
    ------
    DegenerateOperatorError
        Some face has ``X <= x_floor``.
    ConvergenceError
        The residual stays above ``rtol * ||S||`` after refinement.
    """
    grid = f.grid
    if f.min_X() <= x_floor:
        raise DegenerateOperatorError(
            f"transport tensor has faces with X <= {x_floor:g} (min {f.min_X():.3e})"
        )
    S, I = p.fields(grid)
    if I.min() <= 0:
        raise ValueError("decay field I must be bounded below by a positive constant")
    s = S.ravel()
    snorm = np.linalg.norm(s)
    if snorm == 0:
        return np.zeros(grid.shape)
    A = _elliptic_matrix(grid, f.X1, f.X2, p.delta, I)
    lu = spla.splu(A)
    a = lu.solve(s)
    history = []
    for _ in range(3):
        r = s - A @ a
        history.append(float(np.linalg.norm(r)))
        if history[-1] <= rtol * snorm:
            return a.reshape(grid.shape)
        a = a + lu.solve(r)
    history.append(float(np.linalg.norm(s - A @ a)))
    if history[-1] <= rtol * snorm:
        return a.reshape(grid.shape)
    raise ConvergenceError("elliptic solve did not reach the residual bound", history)


def _reaction(grad, X, kappa, gamma):
    q = kappa - gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(grad) ** kappa * X ** q
        rate = np.abs(grad) ** kappa * X ** (q - 1)
    r = np.where(X > 0, r, 0.0)
    rate = np.where(X > 0, rate, 0.0 if q >= 1 else np.inf)
    rate = np.where(np.abs(grad) > 0, rate, 0.0)
    return r, rate


def step_transport(f: ContinuumField, a, p: ContinuumParams, h: float) -> ContinuumField:
    """One Lie-split step of the transport-tensor equation.

    First the feedback ``|d_k a|^kappa X_k^(kappa-gamma)`` is added explicitly,
    then ``(1 + h tau - h D^2 Lap) X_new = X*`` is solved with zero-flux walls.
    The implicit half is an M-matrix solve, so ``min X_new >= min X*/(1+h tau)``.

    Raises :class:`StepRejected` when the explicit growth factor
    ``h |d_k a|^kappa X_k^(kappa-gamma-1)`` exceeds one.
    """
    if not h > 0:
        raise ValueError("time step must be positive")
    grid = f.grid
    a = np.asarray(a, float)
    g1 = (grid.Dx @ a.ravel()).reshape(grid.nx - 1, grid.ny)
    g2 = (grid.Dy @ a.ravel()).reshape(grid.nx, grid.ny - 1)
    r1, k1 = _reaction(g1, f.X1, p.kappa, p.gamma)
    r2, k2 = _reaction(g2, f.X2, p.kappa, p.gamma)
    kmax = max(float(k1.max(initial=0.0)), float(k2.max(initial=0.0)))
    if h * kmax > 1.0:
        raise StepRejected(
            f"explicit feedback growth factor {h * kmax:.3g} > 1",
            suggested_h=0.5 / kmax if math.isfinite(kmax) else None,
        )
    out = []
    for X, r, (m, n) in ((f.X1, r1, f.X1.shape), (f.X2, r2, f.X2.shape)):
        Xs = (X + h * r).ravel()
        lu = _diffusion_lu(m, n, grid.h1, grid.h2, float(h), float(p.tau), float(p.bigD2))
        out.append(lu.solve(Xs).reshape(m, n))
    Xn1, Xn2 = out
    # roundoff can produce -0.0 or tiny negatives from exact zeros
    return ContinuumField(grid, a.copy(), np.maximum(Xn1, 0.0), np.maximum(Xn2, 0.0))


@dataclass
class ContinuumResult:
    times: list
    fields: list
    steady: bool
    steady_time: float | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> ContinuumField:
        return self.fields[-1]


def run_continuum(
    f0: ContinuumField,
    p: ContinuumParams,
    t_max: float,
    h: float,
    *,
    mode: str = "elliptic",
    snapshot_every: int = 1,
    steady_tol: float | None = 1e-8,
    max_halvings: int = 30,
) -> ContinuumResult:
    """Alternate the auxin solve and the transport step up to ``t_max``.

    ``mode="elliptic"`` solves the fast-time-scale elliptic problem for ``a``
    at every step; ``mode="parabolic"`` advances ``a`` by backward Euler
    instead.  A rejected transport step halves ``h`` for the rest of the run.
    The run halts early when ``max|X_new - X| / (h max|X|) < steady_tol``.
    """
    if mode not in ("elliptic", "parabolic"):
        raise ValueError("mode must be 'elliptic' or 'parabolic'")
    p.check_range()
    grid = f0.grid
    S, I = p.fields(grid)
    f = f0.copy()
    t = 0.0
    times, fields = [0.0], [f.copy()]
    diag = {"min_X": [f.min_X()], "h_changes": [], "n_steps": 0}
    halvings = 0
    step = 0
    while t < t_max * (1 - 1e-12):
        hh = min(h, t_max - t)
        if mode == "elliptic":
            a = solve_elliptic(f, p)
        else:
            A = _elliptic_matrix(grid, f.X1, f.X2, p.delta, I)
            M = (A + sp.identity(A.shape[0]) / hh).tocsc()
            a = spla.spsolve(M, f.a.ravel() / hh + S.ravel()).reshape(grid.shape)
        try:
            fn = step_transport(f, a, p, hh)
        except StepRejected:
            halvings += 1
            if halvings > max_halvings:
                raise
            h = 0.5 * h
            diag["h_changes"].append((t, h))
            continue
        if mode == "parabolic":
            fn.a = a
        prev = f
        f = fn
        t += hh
        step += 1
        diag["min_X"].append(f.min_X())
        if step % snapshot_every == 0:
            times.append(t)
            fields.append(f.copy())
        if steady_tol is not None:
            xm = max(prev.X1.max(), prev.X2.max(), np.finfo(float).tiny)
            change = max(np.abs(f.X1 - prev.X1).max(), np.abs(f.X2 - prev.X2).max())
            if change / (hh * xm) < steady_tol:
                diag["n_steps"] = step
                if times[-1] != t:
                    times.append(t)
                    fields.append(f.copy())
                return ContinuumResult(times, fields, True, t, diag)
    diag["n_steps"] = step
    if times[-1] != t:
        times.append(t)
        fields.append(f.copy())
    return ContinuumResult(times, fields, False, None, diag)


@dataclass
class PLaplacianResult:
    a: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    energies: list
    grad_norms: list
    iterations: int


def p_laplacian_energy(a, grid: ContinuumGrid, p: ContinuumParams) -> float:
    """Discrete ``delta/tau/(kappa+2) sum_k |d_k a|^(kappa+2) + 1/2 I a^2 - S a``."""
    S, I = p.fields(grid)
    a = np.asarray(a, float).ravel()
    g1, g2 = grid.Dx @ a, grid.Dy @ a
    k = p.kappa
    grad_part = p.delta / p.tau / (k + 2) * (np.sum(np.abs(g1) ** (k + 2)) + np.sum(np.abs(g2) ** (k + 2)))
    return float(grid.cell_area * (grad_part + 0.5 * np.sum(I.ravel() * a * a) - np.sum(S.ravel() * a)))


def _pl_gradient(a, grid, p, S, I):
    g1, g2 = grid.Dx @ a, grid.Dy @ a
    k = p.kappa
    c = p.delta / p.tau
    return grid.cell_area * (
        c * (grid.Dx.T @ (np.abs(g1) ** k * g1) + grid.Dy.T @ (np.abs(g2) ** k * g2)) + I * a - S
    ), (g1, g2)


def p_laplacian_steady(
    p: ContinuumParams,
    grid: ContinuumGrid,
    *,
    tol: float = 1e-10,
    max_iter: int = 100,
    a0=None,
) -> PLaplacianResult:
    """Steady state for ``kappa == gamma`` as the minimiser of a convex energy.

    Damped Newton with Armijo backtracking on :func:`p_laplacian_energy`.
    Stops when the cell-wise Euler-Lagrange residual
    ``delta/tau * sum_k -d_k(|d_k a|^kappa d_k a) + I a - S`` is below ``tol``
    in max norm.  Every accepted iterate has energy no larger than the last,
    up to round-off once the energy is flat near the minimiser.
    Returns ``a`` and the face tensor ``X_k = |d_k a|^kappa / tau``.
    """
    if abs(p.kappa - p.gamma) > 1e-12 * max(1.0, abs(p.kappa)):
        raise ValueError("the variational steady state needs kappa == gamma")
    if not (p.kappa > 0 and p.tau > 0):
        raise ValueError("need kappa > 0 and tau > 0")
    S, I = p.fields(grid)
    S, I = S.ravel(), I.ravel()
    if I.min() <= 0:
        raise ValueError("decay field I must be positive")
    a = np.zeros(grid.nx * grid.ny) if a0 is None else np.asarray(a0, float).ravel().copy()
    area = grid.cell_area
    c = p.delta / p.tau
    k = p.kappa

    F = p_laplacian_energy(a, grid, p)
    G, (g1, g2) = _pl_gradient(a, grid, p, S, I)
    energies, gnorms = [F], [float(np.abs(G).max() / area)]
    for it in range(1, max_iter + 1):
        if gnorms[-1] <= tol:
            break
        H = area * (
            c * (k + 1) * (grid.Dx.T @ sp.diags(np.abs(g1) ** k) @ grid.Dx
                           + grid.Dy.T @ sp.diags(np.abs(g2) ** k) @ grid.Dy)
            + sp.diags(I)
        )
        step = spla.spsolve(H.tocsc(), -G)
        slope = float(G @ step)
        noise = 64 * np.finfo(float).eps * max(abs(F), 1.0)
        accepted = None
        if -slope < noise:
            # near the minimiser F is flat to round-off, so the energy cannot
            # rank trial points; take the full step if it shrinks the gradient
            trial = a + step
            Ft = p_laplacian_energy(trial, grid, p)
            Gt, _ = _pl_gradient(trial, grid, p, S, I)
            if Ft <= F + noise and np.abs(Gt).max() / area < gnorms[-1]:
                accepted = (trial, Ft)
        t = 1.0
        for _ in range(60 if accepted is None else 0):
            trial = a + t * step
            Ft = p_laplacian_energy(trial, grid, p)
            if Ft <= F + 1e-4 * t * slope:
                accepted = (trial, Ft)
                break
            t *= 0.5
        if accepted is None:
            raise ConvergenceError("line search failed to decrease the energy", gnorms)
        a, F = accepted
        G, (g1, g2) = _pl_gradient(a, grid, p, S, I)
        energies.append(F)
        gnorms.append(float(np.abs(G).max() / area))
    else:
        if gnorms[-1] > tol:
            raise ConvergenceError(
                f"no convergence in {max_iter} Newton steps", gnorms
            )
    X1 = (np.abs(g1) ** k / p.tau).reshape(grid.nx - 1, grid.ny)
    X2 = (np.abs(g2) ** k / p.tau).reshape(grid.nx, grid.ny - 1)
    return PLaplacianResult(a.reshape(grid.shape), X1, X2, energies, gnorms, len(energies) - 1)


def with_point_source(grid: ContinuumGrid, p: ContinuumParams, center, radius, strength) -> ContinuumParams:
    """Copy of ``p`` with ``S = strength`` on cells within ``radius`` of ``center``."""
    x, y = grid.centers()
    S = np.where((x - center[0]) ** 2 + (y - center[1]) ** 2 <= radius ** 2, float(strength), 0.0)
    return replace(p, S=S)
