import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from venation import build_diamond
from venation.dynamics import ModelParams, PrimaryModel
from venation.errors import (
    ConservationError, DimensionError, NumericalBlowupError, SingularSystemError, StiffFailureError,
)
from venation.solver import IntegratorConfig, detect_steady, integrate, kirchhoff_residual, kirchhoff_solve

from conftest import path3, two_cell

# ---------------------------------------------------------------- Kirchhoff


def test_kirchhoff_two_node():
    P = kirchhoff_solve(two_cell(), np.array([1.0]), np.array([1.0, -1.0]))
    assert np.allclose(P, [0.5, -0.5], atol=1e-14)


def test_kirchhoff_path():
    P = kirchhoff_solve(path3(), np.array([1.0, 2.0]), np.array([1.0, 0.0, -1.0]))
    assert np.allclose(P, [5 / 6, -1 / 6, -4 / 6], atol=1e-14)


def test_kirchhoff_zero_sources():
    g = build_diamond(4, 4, (0.0, 1.0, 0.0, 1.0))
    assert np.all(kirchhoff_solve(g, np.ones(g.n_edges), np.zeros(16)) == 0)


def test_kirchhoff_errors():
    g = path3()
    with pytest.raises(ConservationError):
        kirchhoff_solve(g, np.ones(2), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(SingularSystemError):
        kirchhoff_solve(g, np.array([1.0, 0.0]), np.array([1.0, 0.0, -1.0]))
    with pytest.raises(DimensionError):
        kirchhoff_solve(g, np.ones(3), np.zeros(3))


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_kirchhoff_residual_bound(seed):
    rng = np.random.default_rng(seed)
    g = build_diamond(5, 5, (0.0, 1.0, 0.0, 2.0))
    C = rng.uniform(0.01, 10, g.n_edges)
    S = rng.normal(size=25)
    S -= S.mean()
    P = kirchhoff_solve(g, C, S)
    assert abs(P.mean()) < 1e-12 * max(1, np.abs(P).max())
    assert np.linalg.norm(kirchhoff_residual(g, C, P, S)) <= 1e-10 * np.linalg.norm(S)


# ---------------------------------------------------------------- integrate


def test_stiff_scalar_decay():
    lam = 1e4
    cfg = IntegratorConfig(t_max=1.0, steady_tol=None)
    res = integrate(lambda t, y: -lam * y, [1.0], cfg, jac=lambda t, y: np.array([[-lam]]))
    assert res.t_final == 1.0
    assert abs(res.y_final[0] - np.exp(-lam)) <= cfg.atol
    assert res.stats["n_steps"] < 1000


def test_zero_rhs_is_steady_immediately():
    res = integrate(lambda t, y: np.zeros_like(y), np.arange(4.0), IntegratorConfig())
    assert res.steady and res.steady_time == 0.0
    assert np.array_equal(res.y_final, np.arange(4.0))


def test_two_cell_steady_state_stays(two_cell_params):
    m = PrimaryModel(two_cell(), two_cell_params)
    y0 = np.array([2.0, 1.0, 1.0])
    cfg = IntegratorConfig(t_max=100.0, steady_tol=None)
    res = integrate(m.rhs, y0, cfg, jac=m.jac)
    assert np.all(np.abs(res.y - y0) <= cfg.rtol * np.abs(y0))


def test_two_cell_converges_to_closed_form(two_cell_params):
    m = PrimaryModel(two_cell(), two_cell_params)
    res = integrate(m.rhs, [0.5, 0.5, 0.3], IntegratorConfig(), jac=m.jac,
                    nonneg=m.nonneg, freeze=m.freeze, positive=m.positive)
    assert res.steady
    assert np.allclose(res.y_final, [2.0, 1.0, 1.0], atol=1e-6)


def test_implicit_euler_recurrence():
    h = 0.1
    cfg = IntegratorConfig(max_order=1, formula="bdf", adaptive=False, h_init=h, t_max=2.0,
                           steady_tol=None, newton_tol=1e-14, newton_max_iter=10)
    res = integrate(lambda t, y: -y, [1.0], cfg, jac=lambda t, y: -np.eye(1))
    y = res.y[:, 0]
    assert len(y) == 21
    # linear problem: one Newton step solves the stage exactly
    assert np.allclose(y[1:], y[:-1] / (1 + h), rtol=1e-13, atol=0)


def test_against_scipy_bdf():
    # Robertson-like stiff chemistry as an external oracle
    def f(t, y):
        return np.array([-0.04 * y[0] + 1e4 * y[1] * y[2],
                         0.04 * y[0] - 1e4 * y[1] * y[2] - 3e7 * y[1] ** 2,
                         3e7 * y[1] ** 2])

    y0 = [1.0, 0.0, 0.0]
    cfg = IntegratorConfig(rtol=1e-8, atol=1e-12, t_max=40.0, steady_tol=None)
    ours = integrate(f, y0, cfg).y_final
    ref = solve_ivp(f, (0, 40), y0, method="BDF", rtol=1e-10, atol=1e-14).y[:, -1]
    assert np.allclose(ours, ref, rtol=1e-5, atol=1e-10)


@pytest.mark.parametrize("rtol", [1e-4, 1e-5, 1e-6])
def test_tolerance_convergence(two_cell_params, rtol):
    # measured mid-transient: at the steady state the error sits at round-off
    m = PrimaryModel(two_cell(), two_cell_params)
    y0, T = [0.5, 0.5, 0.3], 5.0
    ref = solve_ivp(m.rhs, (0, T), y0, method="Radau", rtol=1e-13, atol=1e-15).y[:, -1]
    errs = []
    for k in range(4):
        cfg = IntegratorConfig(rtol=rtol / 2 ** k, atol=rtol * 1e-3 / 2 ** k, t_max=T, steady_tol=None)
        errs.append(np.abs(integrate(m.rhs, y0, cfg, jac=m.jac).y_final - ref).max())
    assert all(b < a for a, b in zip(errs, errs[1:])), errs


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=8, deadline=None)
def test_nonnegativity_preserved(seed):
    rng = np.random.default_rng(seed)
    g = build_diamond(4, 4, (0.0, 1.0, 0.0, 1.0))
    S = np.zeros(16)
    S[rng.integers(16)] = rng.uniform(1, 20)
    p = ModelParams(kappa=1.0, gamma=0.5, S=S, I=rng.uniform(0, 1, 16), tau=rng.uniform(0.5, 2))
    m = PrimaryModel(g, p)
    y0 = np.r_[rng.uniform(0, 1, 16), rng.uniform(0, 2, g.n_edges) * (rng.random(g.n_edges) > 0.2)]
    cfg = IntegratorConfig(t_max=30.0, snapshot_every=1)
    res = integrate(m.rhs, y0, cfg, jac=m.jac, nonneg=m.nonneg, freeze=m.freeze, positive=m.positive)
    assert res.y.min() >= -cfg.atol
    # zero activity stays zero
    assert np.all(res.y[:, 16:][:, y0[16:] == 0] == 0)


def test_positive_components_never_hit_zero():
    # pure decay over many e-folds stays strictly positive
    cfg = IntegratorConfig(t_max=500.0, steady_tol=None)
    res = integrate(lambda t, y: -y, [1.0, 1.0], cfg, nonneg=[True, True], freeze=[True, True],
                    positive=[True, False], jac=lambda t, y: -np.eye(2))
    assert res.y_final[0] > 0
    assert np.isclose(np.log(res.y_final[0]), -500.0, rtol=1e-3)


def test_determinism(two_cell_params):
    m = PrimaryModel(two_cell(), two_cell_params)
    runs = [integrate(m.rhs, [0.5, 0.5, 0.3], IntegratorConfig(), jac=m.jac) for _ in range(2)]
    assert np.array_equal(runs[0].t, runs[1].t) and np.array_equal(runs[0].y, runs[1].y)


def test_snapshot_times_increase():
    res = integrate(lambda t, y: -y, [1.0], IntegratorConfig(t_max=5.0, steady_tol=None, snapshot_every=3))
    assert np.all(np.diff(res.t) > 0) and res.t_final == 5.0


def test_steady_result_satisfies_tolerance(two_cell_params):
    m = PrimaryModel(two_cell(), two_cell_params)
    res = integrate(m.rhs, [0.5, 0.5, 0.3], IntegratorConfig(steady_tol=1e-9), jac=m.jac)
    assert res.steady and detect_steady(lambda y: m.rhs(0, y), res.y_final, 1e-9)


def test_blowup_and_stiff_failure():
    with pytest.raises(NumericalBlowupError):
        integrate(lambda t, y: np.where(t > 0.5, np.inf, -y), [1.0], IntegratorConfig(t_max=2.0, steady_tol=None))
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, [np.nan])
    cfg = IntegratorConfig(t_max=1.0, adaptive=False, h_init=0.5, steady_tol=None, newton_max_iter=1)
    with pytest.raises(StiffFailureError):
        integrate(lambda t, y: -y ** 3 * 50, [3.0], cfg)


@pytest.mark.parametrize("kw", [dict(rtol=0), dict(max_order=6), dict(h_min=1.0, h_max=0.5),
                                dict(formula="rk4"), dict(adaptive=False)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


# ---------------------------------------------------------------- detect_steady


def test_detect_steady_examples(two_cell_params):
    assert detect_steady(lambda y: np.zeros_like(y), np.ones(3))
    m = PrimaryModel(two_cell(), two_cell_params)
    assert detect_steady(lambda y: m.rhs(0, y), np.array([2.0, 1.0, 1.0]), 1e-8)
    decay = PrimaryModel(two_cell(), ModelParams(kappa=1.0))
    assert not detect_steady(lambda y: decay.rhs(0, y), np.array([1.0, 1.0, 1.0]), 0.99)
    assert not detect_steady(lambda y: np.full_like(y, np.nan), np.ones(2))
