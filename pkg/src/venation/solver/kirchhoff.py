"""Weighted graph-Laplacian solve for the Kirchhoff flow balance."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from ..errors import ConservationError, DimensionError, SingularSystemError

__all__ = ["weighted_laplacian", "kirchhoff_solve", "kirchhoff_residual"]


def weighted_laplacian(g, w) -> sp.csr_matrix:
    """``B^T diag(w) B`` for the signed incidence matrix ``B`` of ``g``."""
    B = g.incidence
    return (B.T @ sp.diags(np.asarray(w, float)) @ B).tocsr()


def kirchhoff_residual(g, C, P, S) -> np.ndarray:
    """Per-vertex residual of ``-sum_j C_ij (P_j - P_i)/L_ij - S_i``."""
    return weighted_laplacian(g, np.asarray(C, float) / g.lengths) @ P - S


def kirchhoff_solve(g, C, S, *, rtol=1e-10, conservation_tol=1e-12) -> np.ndarray:
    """Zero-mean pressures solving the Kirchhoff law for conductivities ``C``.

    Only edges with ``C > 0`` enter the system.  The solve grounds the last
    vertex, factorises the reduced Laplacian with a sparse LU, applies one
    step of iterative refinement and removes the mean.

    Raises
    ------
    ConservationError
        ``sum(S)`` exceeds ``conservation_tol * ||S||``.
    SingularSystemError
        The positive-conductivity subgraph is disconnected, or the residual
        bound ``rtol * ||S||`` cannot be met.
    """
    C = np.asarray(C, float)
    S = np.asarray(S, float)
    n = g.n_vertices
    if C.shape != (g.n_edges,) or S.shape != (n,):
        raise DimensionError(
            f"expected C of shape ({g.n_edges},) and S of shape ({n},), "
            f"got {C.shape} and {S.shape}"
        )
    if np.any(C < 0):
        raise ValueError("conductivities must be nonnegative")
    snorm = np.linalg.norm(S)
    if abs(S.sum()) > conservation_tol * max(snorm, np.finfo(float).tiny):
        raise ConservationError(f"sources do not balance: sum(S) = {S.sum():.3e}")
    if snorm == 0.0:
        return np.zeros(n)

    pos = C > 0
    e = g.edges[pos]
    adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise SingularSystemError(
            f"positive-conductivity subgraph has {ncomp} components"
        )

    Lw = weighted_laplacian(g, np.where(pos, C, 0.0) / g.lengths)
    red = Lw[:-1, :-1].tocsc()
    lu = spla.splu(red)
    P = np.zeros(n)
    P[:-1] = lu.solve(S[:-1])
    r = Lw @ P - S
    P[:-1] -= lu.solve(r[:-1])
    P -= P.mean()
    res = np.linalg.norm(Lw @ P - S)
    if res > rtol * snorm:
        raise SingularSystemError(
            f"Kirchhoff residual {res:.3e} exceeds {rtol:.1e} * ||S||"
        )
    return P
