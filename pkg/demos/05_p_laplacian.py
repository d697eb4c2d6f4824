"""
Variational steady states
=========================

When kappa == gamma the steady auxin field minimises a convex energy.  For
tiny kappa the minimiser approaches the linear elliptic solution; for larger
kappa the gradient feedback sharpens the profile.
"""
import numpy as np

from venation.continuum import (
    ContinuumField, ContinuumGrid, ContinuumParams, p_laplacian_steady, solve_elliptic, with_point_source,
)

grid = ContinuumGrid((0.0, 1.0, 0.0, 1.0), 24, 24)
x, y = grid.centers()
S = 1 + np.cos(np.pi * x) * np.sin(2 * np.pi * y)

near_linear = p_laplacian_steady(ContinuumParams(kappa=1e-6, gamma=1e-6, S=S), grid)
linear = solve_elliptic(ContinuumField.constant(grid), ContinuumParams(S=S))
print("kappa=1e-6 vs linear:", np.abs(near_linear.a - linear).max())

for k in (0.25, 0.5, 1.0, 2.0):
    p = with_point_source(grid, ContinuumParams(kappa=k, gamma=k), (0.1, 0.5), 0.15, 10.0)
    r = p_laplacian_steady(p, grid)
    print(f"kappa={k:<5} iterations {r.iterations:2d}  F {r.energies[-1]:+.5f}  max a {r.a.max():.3f}")
