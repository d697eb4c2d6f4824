import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from venation import build_diamond
from venation.analysis import (
    check_bounds, coverage_overlap, energy_dissipation, murray_residual, pattern_extent,
    reflection_permutation, symmetry_error,
)
from venation.dynamics import HuCaiModel, ModelParams, NetworkState, PrimaryModel
from venation.errors import NotApplicableError
from venation.solver import IntegratorConfig, integrate

from conftest import BASELINE_BBOX, baseline_params, path3, two_cell


def _run(model, y0, **kw):
    cfg = IntegratorConfig(**{"snapshot_every": 1, **kw})
    return integrate(model.rhs, y0, cfg, jac=model.jac, nonneg=model.nonneg,
                     freeze=model.freeze, positive=getattr(model, "positive", None))


# ---------------------------------------------------------------- Murray


def test_murray_two_cell(two_cell_params):
    r = murray_residual(two_cell(), two_cell_params, NetworkState([2.0, 1.0], [1.0]))
    assert r.steady and not r.warnings
    assert r.skipped_vertices == [1]
    assert r.residual[0] == 0.0 and np.isnan(r.residual[1])
    assert r.max_relative_residual == 0.0
    # |Q|^2 = 1 = tau X^1.5
    assert r.active_edges == 1 and r.max_edge_residual == 0.0
    assert np.allclose(r.general_residual, 0.0)


def test_murray_zero_activity():
    g = build_diamond(3, 3, (0, 1, 0, 1))
    r = murray_residual(g, ModelParams(), NetworkState(np.ones(9), np.zeros(16)))
    assert np.all(r.residual == 0) and r.max_relative_residual == 0 and r.active_edges == 0


def test_murray_flags_non_steady(two_cell_params):
    r = murray_residual(two_cell(), two_cell_params, NetworkState([3.0, 1.0], [1.0]))
    assert not r.steady and r.warnings
    assert r.max_relative_residual == 0.0  # the vertex law can hold off steady state
    assert r.max_edge_residual > 0


def test_murray_skipped_set_matches_decay():
    g = build_diamond(5, 5, (0, 1, 0, 1))
    I = np.zeros(25)
    I[[3, 7, 20]] = [1.0, 0.5, 2.0]
    r = murray_residual(g, ModelParams(I=I), NetworkState(np.ones(25), np.ones(g.n_edges)))
    assert r.skipped_vertices == [3, 7, 20]
    assert np.all(np.isfinite(np.delete(r.residual, [3, 7, 20])))


def test_murray_holds_at_baseline_steady_state(diamond9):
    p = baseline_params(diamond9)
    m = PrimaryModel(diamond9, p)
    res = _run(m, np.ones(m.size), snapshot_every=100)
    assert res.steady
    r = murray_residual(diamond9, p, m.unpack(res.y_final))
    assert r.steady and r.max_relative_residual <= 1e-6


# ---------------------------------------------------------------- bounds


def test_check_bounds_alpha():
    p = ModelParams(kappa=1.0)
    m = PrimaryModel(two_cell(), p)
    res = _run(m, [3.0, 4.0, 1.0], t_max=50.0)
    rep = check_bounds(res, p, model=m)
    assert rep.alpha == 5.0 and rep.bounded_check
    assert rep.max_a_over_trajectory <= 5.0 and rep.min_a > 0
    assert rep.passed


def test_check_bounds_zero_vertex_is_info():
    # vertex 2 starts at zero and is cut off by a zero-activity edge
    g = path3()
    p = ModelParams(kappa=1.0, S=np.array([1.0, 0.0, 0.0]), I=np.array([0.0, 1.0, 0.0]))
    m = PrimaryModel(g, p)
    res = _run(m, [1.0, 1.0, 0.0, 1.0, 0.0], t_max=10.0)
    rep = check_bounds(res, p, model=m)
    assert rep.passed and not rep.bounded_check
    assert ("a_stays_zero", 2) in rep.info


def test_check_bounds_reports_violations():
    from venation.solver import SimulationResult

    traj = SimulationResult(np.array([0.0, 1.0]), np.array([[1.0, 1.0, 1.0], [2.0, -0.5, -1.0]]), False, None)
    rep = check_bounds(traj, ModelParams(), g=two_cell())
    kinds = {v[1] for v in rep.violations}
    assert kinds == {"X_negative", "a_nonpositive", "a_above_alpha"}
    assert not rep.passed
    with pytest.raises(ValueError):
        check_bounds(traj, ModelParams())


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=6, deadline=None)
def test_check_bounds_random_runs(seed):
    rng = np.random.default_rng(seed)
    g = build_diamond(4, 4, (0, 1, 0, 1))
    p = ModelParams(kappa=rng.uniform(0.6, 1.5), gamma=0.5, tau=rng.uniform(0.5, 2))
    m = PrimaryModel(g, p)
    res = _run(m, np.r_[rng.uniform(0.1, 2, 16), rng.uniform(0, 2, g.n_edges)], t_max=20.0)
    assert check_bounds(res, p, model=m, atol=1e-9).passed


# ---------------------------------------------------------------- energy


def _two_node_hu_cai(C0):
    p = ModelParams(gamma=1.0, tau=1.0, S=np.array([1.0, -1.0]))
    m = HuCaiModel(two_cell(), p)
    return m, _run(m, [C0], t_max=10.0, steady_tol=None)


def test_energy_two_node_decreasing():
    m, res = _two_node_hu_cai(4.0)
    rep = energy_dissipation(res, m)
    assert rep.passed and rep.energies[0] == 4.25
    # strict decrease while C is still visibly away from the fixed point
    moving = np.abs(res.y[:-1, 0] - 1.0) > 1e-4
    assert np.all(rep.increments[moving] < 0)
    # dC/dt = (1/C^2 - 1) C relaxes to C = 1
    assert np.isclose(res.y_final[0], 1.0, atol=1e-5)
    assert np.isclose(rep.energies[-1], 2.0, atol=1e-8)


def test_energy_stationary():
    m, _ = _two_node_hu_cai(1.0)
    from venation.solver import SimulationResult

    rep = energy_dissipation(SimulationResult(np.arange(3.0), np.ones((3, 1)), True, 0.0), m)
    assert rep.passed and np.all(rep.increments == 0)


# ---------------------------------------------------------------- symmetry


def test_symmetry_examples(diamond9):
    g = diamond9
    vperm, eperm = reflection_permutation(g, "y")
    a = np.ones(81) + (g.positions[:, 1] - (-0.5)) ** 2
    X = g.lengths.copy()
    assert symmetry_error(g, NetworkState(a, X)) < 1e-12
    a2 = a.copy()
    off_axis = int(np.flatnonzero(vperm != np.arange(81))[0])
    a2[off_axis] += 1e-3
    assert np.isclose(symmetry_error(g, NetworkState(a2, X)), 1e-3)


def test_symmetry_not_applicable():
    g = build_diamond(4, 6, (0, 1, 0, 1))
    with pytest.raises(NotApplicableError):
        symmetry_error(g, NetworkState(np.ones(24), np.ones(g.n_edges)))
    with pytest.raises(ValueError):
        reflection_permutation(g, "z")


def test_baseline_is_symmetric(diamond9):
    p = baseline_params(diamond9)
    m = PrimaryModel(diamond9, p)
    res = _run(m, np.ones(m.size), snapshot_every=100)
    assert symmetry_error(diamond9, m.unpack(res.y_final)) <= 1e-6


# ---------------------------------------------------------------- metrics


def test_pattern_extent_examples():
    assert pattern_extent(NetworkState(np.ones(3), np.zeros(5)), 0.0) == 0
    assert pattern_extent(NetworkState(np.ones(3), np.ones(5)), 0.5) == 5
    assert pattern_extent(NetworkState(np.ones(3), [0.1, 1.0, 2.0]), 1.0) == 1


def test_coverage_overlap():
    g = path3()
    # the strong edge lifts both of its endpoints: X mask {0, 1}
    assert coverage_overlap(g, NetworkState([3.0, 2.0, 1.0], [5.0, 0.0]), 0.5) == 1.0
    assert np.isclose(coverage_overlap(g, NetworkState([1.0, 2.0, 3.0], [5.0, 0.0]), 0.5), 1 / 3)
    v = coverage_overlap(build_diamond(5, 5, BASELINE_BBOX),
                         NetworkState(np.arange(25.0), np.arange(56.0)))
    assert 0.0 <= v <= 1.0


def test_reports_serialise(two_cell_params):
    import json

    r = murray_residual(two_cell(), two_cell_params, NetworkState([2.0, 1.0], [1.0]))
    json.dumps(r.to_dict())
