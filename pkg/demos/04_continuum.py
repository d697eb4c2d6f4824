"""
Continuum limit
===============

The elliptic auxin equation coupled to the parabolic transport tensor on a
32x32 grid, with a small source disc at the top.  First a convergence check
of the elliptic solver against a manufactured solution, then a transient run.
"""
import numpy as np

from venation.continuum import (
    ContinuumField, ContinuumGrid, ContinuumParams, run_continuum, solve_elliptic, with_point_source,
)

errs = []
for n in (16, 32, 64):
    grid = ContinuumGrid((0.0, 1.0, 0.0, 1.0), n, n)
    x, y = grid.centers()
    exact = np.cos(np.pi * x) * np.cos(np.pi * y)
    a = solve_elliptic(ContinuumField.constant(grid), ContinuumParams(S=(2 * np.pi ** 2 + 1) * exact))
    errs.append(np.abs(a - exact).max())
print("observed orders:", np.round(np.log2(np.array(errs[:-1]) / errs[1:]), 3))

grid = ContinuumGrid((0.0, 1.0, 0.0, 1.0), 32, 32)
p = with_point_source(grid, ContinuumParams(), (0.05, 0.5), 0.08, 50.0)
res = run_continuum(ContinuumField.constant(grid), p, t_max=2.0, h=0.01, snapshot_every=50)
X1, X2 = res.final.cell_X()
print(f"t = {res.times[-1]:.2f}: max X1 {X1.max():.2f} in column {np.argmax(X1.max(axis=0))}, "
      f"min X {res.final.min_X():.3f}")
# the vein shows up as a column of large X1 under the source
print(np.round(X1[::4, ::4], 2))
