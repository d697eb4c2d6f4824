import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from venation import build_diamond
from venation.dynamics import (
    HuCaiModel, MitchisonModel, MitchisonState, ModelParams, NetworkState, PrimaryModel,
    energy, flux, rhs_hu_cai, rhs_mitchison, rhs_primary,
)
from venation.errors import DimensionError, SingularRHSError, WellPosednessWarning
from venation.solver import kirchhoff_solve

from conftest import baseline_params, two_cell

G3 = build_diamond(3, 3, (0.0, 1.0, 0.0, 1.0))
finite = dict(allow_nan=False, allow_infinity=False)


def test_flux_examples():
    g = two_cell()
    assert flux(g, NetworkState([1.0, 3.0], [2.0]))[0] == 4.0
    assert flux(g, NetworkState([1.0, 3.0], [0.0]))[0] == 0.0
    g = G3
    assert np.all(flux(g, NetworkState(np.full(9, 2.5), np.ones(16))) == 0)


def test_flux_dimension_mismatch():
    with pytest.raises(DimensionError):
        flux(G3, NetworkState(np.ones(8), np.ones(16)))


def test_rhs_zero_state_is_zero():
    d = rhs_primary(G3, ModelParams(), NetworkState(np.linspace(0, 1, 9), np.zeros(16)))
    assert np.all(d.a == 0) and np.all(d.X == 0)


def test_two_cell_steady_state(two_cell_params):
    d = rhs_primary(two_cell(), two_cell_params, NetworkState([2.0, 1.0], [1.0]))
    assert np.allclose(d.a, 0, atol=1e-15) and np.allclose(d.X, 0, atol=1e-15)


def test_uniform_decay():
    g = build_diamond(4, 4, (0.0, 2.0, 0.0, 3.0))
    d = rhs_primary(g, ModelParams(), NetworkState(np.full(16, 0.7), np.ones(g.n_edges)))
    assert np.allclose(d.X, -g.lengths) and np.all(d.a == 0)


def test_rhs_hand_value():
    # a=(0,2), X=1, L=1: Q=2, da=(2,-2), dX = 2^2 * 1^1.5 - 1 = 3
    d = rhs_primary(two_cell(), ModelParams(), NetworkState([0.0, 2.0], [1.0]))
    assert np.allclose(d.a, [2.0, -2.0]) and np.isclose(d.X[0], 3.0)


def test_singular_rhs_and_warnings():
    p = ModelParams(kappa=0.5, gamma=0.5)
    with pytest.raises(SingularRHSError):
        rhs_primary(two_cell(), p, NetworkState([0.0, 1.0], [0.0]))
    with pytest.warns(WellPosednessWarning):
        PrimaryModel(two_cell(), ModelParams(kappa=2.0, gamma=0.5))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PrimaryModel(two_cell(), ModelParams(kappa=1.0, gamma=0.5))


@pytest.mark.parametrize("kw", [dict(delta=0), dict(gamma=0), dict(tau=-1), dict(nu=0), dict(I=[-1.0, 0.0])])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_nu_defaults_to_tau_squared():
    assert ModelParams(tau=3.0).metabolic == 9.0
    assert ModelParams(tau=3.0, nu=2.0).metabolic == 2.0


@pytest.mark.parametrize("C, expected", [(1.0, 0.0), (4.0, -3.75)])
def test_hu_cai_two_node(C, expected):
    g = two_cell()
    p = ModelParams(gamma=1.0, S=np.array([1.0, -1.0]))
    P = kirchhoff_solve(g, np.array([C]), p.S)
    assert np.isclose(rhs_hu_cai(g, p, [C], P)[0], expected, atol=1e-14)


def test_hu_cai_zero_conductivity():
    assert np.all(rhs_hu_cai(G3, ModelParams(), np.zeros(16), np.linspace(0, 1, 9)) == 0)


def test_mitchison_examples():
    g = two_cell()
    d = rhs_mitchison(g, ModelParams(), MitchisonState([2.0, 0.0], [1.0]))
    assert np.allclose(d.s, [-2.0, 2.0])
    # phi=2 so D relaxes towards 4
    assert np.isclose(d.D[0], 3.0)
    D = np.linspace(0.1, 2, 16)
    d = rhs_mitchison(G3, ModelParams(mitchison_rate=0.3), MitchisonState(np.full(9, 5.0), D))
    assert np.all(d.s == 0) and np.allclose(d.D, -0.3 * D)


def test_energy_examples():
    g = two_cell()
    assert energy(g, ModelParams(nu=1.0, gamma=1.0), [1.0], [1.0]) == 2.0
    assert energy(g, ModelParams(), [0.0], [0.0]) == 0.0
    g2 = two_cell(L=2.0)
    assert np.isclose(energy(g2, ModelParams(nu=1.0, gamma=0.5), [4.0], [1.0]), 8.5)
    assert energy(g, ModelParams(), [0.0], [1.0]) == np.inf


@given(arrays(float, 9, elements=st.floats(-5, 5, **finite)),
       arrays(float, 16, elements=st.floats(0, 5, **finite)))
@settings(max_examples=60, deadline=None)
def test_flux_antisymmetric(a, X):
    q = flux(G3, NetworkState(a, X))
    # reversing every edge flips the gradient
    i, j = G3.edges.T
    q_rev = X * (a[i] - a[j]) / G3.lengths
    assert np.allclose(q, -q_rev)
    assert np.all(q[X == 0] == 0)


@given(arrays(float, 9, elements=st.floats(0, 5, **finite)),
       arrays(float, 16, elements=st.floats(0, 5, **finite)),
       st.floats(0.6, 1.5), st.floats(0.1, 2.0))
@settings(max_examples=60, deadline=None)
def test_absorbing_zero_and_decay_bound(a, X, kappa, tau):
    X = np.where(X < 0.5, 0.0, X)
    p = ModelParams(kappa=kappa, gamma=0.5, tau=tau, sigma=1.3)
    d = rhs_primary(G3, p, NetworkState(a, X))
    assert np.all(d.X[X == 0] == 0.0)
    assert np.all(d.X >= -p.sigma * p.tau * X * G3.lengths - 1e-12)


@given(arrays(float, 9, elements=st.floats(-5, 5, **finite)),
       arrays(float, 16, elements=st.floats(0, 5, **finite)))
@settings(max_examples=60, deadline=None)
def test_mitchison_conserves_sum(s, D):
    d = rhs_mitchison(G3, ModelParams(), MitchisonState(s, D))
    assert abs(d.s.sum()) <= 1e-12 * max(1.0, np.abs(s).max() * D.max() * 10)


def _fd(fun, y, eps=1e-7):
    f0 = fun(0.0, y)
    J = np.empty((f0.size, y.size))
    for k in range(y.size):
        yp = y.copy()
        h = eps * max(1.0, abs(y[k]))
        yp[k] += h
        J[:, k] = (fun(0.0, yp) - f0) / h
    return J


def test_primary_jacobian_matches_fd():
    rng = np.random.default_rng(1)
    g = G3
    p = baseline_params(g, xi_s=3.0)
    with pytest.warns(WellPosednessWarning):
        m = PrimaryModel(g, p)
    y = np.r_[rng.uniform(0.5, 2, 9), rng.uniform(0.5, 2, 16)]
    assert np.allclose(m.jac(0.0, y).toarray(), _fd(m.rhs, y), rtol=1e-5, atol=1e-5)


def test_mitchison_jacobian_matches_fd():
    rng = np.random.default_rng(2)
    m = MitchisonModel(G3, ModelParams(mitchison_rate=0.7))
    y = np.r_[rng.uniform(0, 2, 9), rng.uniform(0.5, 2, 16)]
    assert np.allclose(m.jac(0.0, y).toarray(), _fd(m.rhs, y), rtol=1e-5, atol=1e-5)


def test_hu_cai_model_checks_balance():
    from venation.errors import ConservationError

    with pytest.raises(ConservationError):
        HuCaiModel(G3, ModelParams(S=np.r_[1.0, np.zeros(8)]))


def test_hu_cai_energy_descent_direction():
    # a small explicit step along the rhs lowers the energy when nu = tau^2
    g = G3
    S = np.zeros(9)
    S[0], S[-1] = 1.0, -1.0
    m = HuCaiModel(g, ModelParams(gamma=0.5, tau=1.0, S=S))
    C = np.random.default_rng(3).uniform(0.5, 2, 16)
    e0 = m.energy(C)
    e1 = m.energy(C + 1e-4 * m.rhs(0.0, C))
    assert e1 < e0
