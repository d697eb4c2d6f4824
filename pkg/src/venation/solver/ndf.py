"""Variable-order, variable-step numerical differentiation formulas.

The stepper follows the quasi-constant step NDF scheme of Shampine and
Reichelt (the MATLAB ``ode15s`` family): the solution history is kept as a
modified divided-difference array ``D`` that is rescaled whenever the step
changes, orders 1..5 are selected from local error estimates, and each step
solves its implicit stage with a simplified Newton iteration that reuses one
factorisation of ``I - c J``.

On top of the textbook scheme this implementation adds what the network
models need:

* a nonnegativity guard for flagged components (rejects and halves the step
  if any is driven below ``-atol``, projects ``[-atol, 0)`` to zero),
* relative-only error control for components flagged ``positive`` (those
  that start positive and must stay so; an absolute floor would let them
  drift through zero once they decay below ``atol``),
* permanent freezing of flagged components that reach exactly zero,
* steady-state detection on the rhs norm after every accepted step,
* a fixed-step mode (``adaptive=False``) used to check the recurrences.
"""
from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lu_factor, lu_solve

from ..errors import NumericalBlowupError, StiffFailureError

__all__ = ["IntegratorConfig", "SimulationResult", "integrate", "detect_steady"]

MAX_ORDER = 5
NEWTON_MAXITER_DEFAULT = 4
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
EPS = np.finfo(float).eps

# absolute-tolerance floor of "positive" components
POSITIVE_ATOL = 1e-300

# Klopfenstein-Shampine NDF coefficients; zero for plain BDF.
NDF_KAPPA = np.array([0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0])


@dataclass
class IntegratorConfig:
    """Tolerances and limits for :func:`integrate`.

    ``steady_tol`` of ``None`` disables steady-state detection.  With
    ``adaptive=False`` the step is held at ``h_init`` and no local-error
    rejection takes place.  ``formula`` selects ``"ndf"`` (default) or
    ``"bdf"``; only the latter reduces to implicit Euler at order one.
    """

    rtol: float = 1e-6
    atol: float = 1e-9
    max_order: int = 5
    h_init: float | None = None
    h_min: float = 1e-12
    h_max: float = math.inf
    t_max: float = 1e6
    newton_tol: float | None = None
    newton_max_iter: int = NEWTON_MAXITER_DEFAULT
    formula: str = "ndf"
    adaptive: bool = True
    steady_tol: float | None = 1e-8
    snapshot_every: int = 1
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not (1 <= int(self.max_order) <= MAX_ORDER):
            raise ValueError(f"max_order must lie in 1..{MAX_ORDER}")
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if self.formula not in ("ndf", "bdf"):
            raise ValueError("formula must be 'ndf' or 'bdf'")
        if not self.adaptive and not self.h_init:
            raise ValueError("fixed-step integration needs h_init")
        if self.newton_max_iter < 1 or self.snapshot_every < 1:
            raise ValueError("newton_max_iter and snapshot_every must be >= 1")
        self.max_order = int(self.max_order)


@dataclass
class SimulationResult:
    """Snapshots of an integration plus step statistics and diagnostics."""

    t: np.ndarray
    y: np.ndarray
    steady: bool
    steady_time: float | None
    stats: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def snapshots(self):
        return list(zip(self.t.tolist(), self.y))

    @property
    def y_final(self) -> np.ndarray:
        return self.y[-1]

    @property
    def t_final(self) -> float:
        return float(self.t[-1])


def _rms(x):
    return float(np.linalg.norm(x) / math.sqrt(x.size)) if x.size else 0.0


def detect_steady(rhs, y, tol: float = 1e-8) -> bool:
    """True iff ``||rhs(y)||_inf / max(1, ||y||_inf) < tol``."""
    y = np.asarray(y, float)
    f = np.asarray(rhs(y), float)
    if not np.all(np.isfinite(f)):
        return False
    fn = np.max(np.abs(f)) if f.size else 0.0
    yn = np.max(np.abs(y)) if y.size else 0.0
    return bool(fn / max(1.0, yn) < tol)


def _compute_R(order, factor):
    I = np.arange(1, order + 1)[:, None]
    J = np.arange(1, order + 1)
    M = np.zeros((order + 1, order + 1))
    M[1:, 1:] = (I - 1 - factor * J) / I
    M[0] = 1
    return np.cumprod(M, axis=0)


def _change_D(D, order, factor):
    R = _compute_R(order, factor)
    U = _compute_R(order, 1)
    RU = R.dot(U)
    D[: order + 1] = RU.T.dot(D[: order + 1])


def _fd_jacobian(fun, t, y, f0):
    n = y.size
    J = np.empty((n, n))
    for k in range(n):
        dk = math.sqrt(EPS) * max(1.0, abs(y[k]))
        yk = y.copy()
        yk[k] += dk
        J[:, k] = (fun(t, yk) - f0) / dk
    return J


class _Newton:
    """Factorisation of ``I - c J`` with sparse or dense backend."""

    def __init__(self, J, c):
        n = J.shape[0]
        if sp.issparse(J):
            self._lu = spla.splu((sp.identity(n, format="csc") - c * J).tocsc())
            self.solve = self._lu.solve
        else:
            self._lu = lu_factor(np.identity(n) - c * J, overwrite_a=True, check_finite=False)
            self.solve = lambda b: lu_solve(self._lu, b, check_finite=False)


def integrate(
    fun,
    y0,
    cfg: IntegratorConfig | None = None,
    *,
    jac=None,
    t0: float = 0.0,
    nonneg=None,
    freeze=None,
    positive=None,
) -> SimulationResult:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``cfg.t_max``.

    Parameters
    ----------
    fun : callable(t, y) -> array
    y0 : array
    cfg : IntegratorConfig
    jac : callable(t, y) -> sparse or dense matrix, optional
        Finite differences are used when omitted.
    nonneg : bool array, optional
        Components guarded against going negative.
    freeze : bool array, optional
        Components that stay at zero permanently once they hit exactly zero.
    positive : bool array, optional
        Components whose absolute tolerance is dropped to ``POSITIVE_ATOL``
        when they start positive, so that sign is resolved at every scale.

    Returns
    -------
    SimulationResult
        Integration stops at ``t_max`` or at the first accepted step where
        :func:`detect_steady` holds with ``cfg.steady_tol``.
    """
    cfg = cfg or IntegratorConfig()
    wall0 = _time.perf_counter()
    y = np.array(y0, dtype=float)
    n = y.size
    if not np.all(np.isfinite(y)):
        raise ValueError("y0 must be finite")
    nonneg = np.zeros(n, bool) if nonneg is None else np.asarray(nonneg, bool)
    freeze_mask = np.zeros(n, bool) if freeze is None else np.asarray(freeze, bool)
    frozen = np.zeros(n, bool)

    stats = {"n_steps": 0, "n_rejected": 0, "n_fev": 0, "n_jev": 0, "n_lu": 0,
             "n_newton_fail": 0, "n_nonneg_reject": 0, "order_hist": [0] * (MAX_ORDER + 1)}
    diag = {"pruned": [], "events": []}

    def f(t, yy):
        stats["n_fev"] += 1
        out = np.asarray(fun(t, yy), float)
        if frozen.any():
            out = out.copy()
            out[frozen] = 0.0
        return out

    def J_eval(t, yy, f0):
        stats["n_jev"] += 1
        if jac is None:
            Jm = _fd_jacobian(f, t, yy, f0)
        else:
            Jm = jac(t, yy)
        if frozen.any():
            keep = (~frozen).astype(float)
            Jm = sp.diags(keep) @ Jm if sp.issparse(Jm) else keep[:, None] * Jm
        return sp.csc_matrix(Jm) if sp.issparse(Jm) else np.asarray(Jm, float)

    t = float(t0)
    t_max = float(cfg.t_max)
    f0 = f(t, y)
    if not np.all(np.isfinite(f0)):
        raise NumericalBlowupError(f"non-finite rhs at t={t}")

    ts, ys = [t], [y.copy()]

    def steady_now(yy, ff):
        if cfg.steady_tol is None:
            return False
        fn = np.max(np.abs(ff)) if n else 0.0
        yn = np.max(np.abs(yy)) if n else 0.0
        return fn / max(1.0, yn) < cfg.steady_tol

    def finish(steady, steady_time):
        if ts[-1] != t:
            ts.append(t)
            ys.append(y.copy())
        stats["wall_time"] = _time.perf_counter() - wall0
        diag["frozen"] = np.flatnonzero(frozen).tolist()
        return SimulationResult(np.array(ts), np.array(ys), steady, steady_time, stats, diag)

    if steady_now(y, f0):
        return finish(True, t)
    if t >= t_max:
        return finish(False, None)

    rtol, atol = cfg.rtol, cfg.atol
    if positive is not None:
        pos = np.asarray(positive, bool) & (y > 0)
        if pos.any():
            atol = np.where(pos, POSITIVE_ATOL, atol)
    max_order = cfg.max_order
    kappa = NDF_KAPPA if cfg.formula == "ndf" else np.zeros(MAX_ORDER + 1)
    gamma = np.r_[0.0, np.cumsum(1.0 / np.arange(1, MAX_ORDER + 1))]
    alpha = (1 - kappa) * gamma
    error_const = kappa * gamma + 1.0 / np.arange(1, MAX_ORDER + 2)
    newton_tol = cfg.newton_tol or max(10 * EPS / rtol, min(0.03, rtol ** 0.5))
    newton_maxiter = cfg.newton_max_iter

    if cfg.h_init:
        h = float(cfg.h_init)
    else:
        scale0 = atol + rtol * np.abs(y)
        d0, d1 = _rms(y / scale0), _rms(f0 / scale0)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(max(h, cfg.h_min), cfg.h_max, t_max - t)

    D = np.zeros((MAX_ORDER + 3, n))
    D[0] = y
    D[1] = f0 * h
    order = 1
    n_equal_steps = 0
    J = J_eval(t, y, f0)
    jac_current = True
    LU = None
    c_lu = None

    while True:
        if stats["n_steps"] >= cfg.max_steps:
            diag["events"].append(("max_steps", t))
            return finish(False, None)

        # clip to the horizon
        if t + h > t_max:
            factor = (t_max - t) / h
            _change_D(D, order, factor)
            h = t_max - t
            n_equal_steps = 0
            LU = None

        step_accepted = False
        while not step_accepted:
            if h < cfg.h_min * (1 - 1e-12) and h < t_max - t:
                raise StiffFailureError(
                    f"step size {h:.3e} fell below h_min={cfg.h_min:.1e} at t={t:.6g}",
                    {"t": t, "h": h, "order": order, "stats": dict(stats)},
                )
            t_new = t + h
            y_predict = np.sum(D[: order + 1], axis=0)
            scale = atol + rtol * np.abs(y_predict)
            psi = np.dot(D[1: order + 1].T, gamma[1: order + 1]) / alpha[order]
            c = h / alpha[order]

            converged = False
            while not converged:
                if LU is None or c_lu != c:
                    LU = _Newton(J, c)
                    c_lu = c
                    stats["n_lu"] += 1
                yk = y_predict.copy()
                d = np.zeros(n)
                dy_norm_old = None
                blew_up = False
                for k in range(newton_maxiter):
                    fk = f(t_new, yk)
                    if not np.all(np.isfinite(fk)):
                        blew_up = True
                        break
                    dy = LU.solve(c * fk - psi - d)
                    dy_norm = _rms(dy / scale)
                    rate = None if dy_norm_old is None else dy_norm / dy_norm_old
                    if rate is not None and (
                        rate >= 1 or rate ** (newton_maxiter - k) / (1 - rate) * dy_norm > newton_tol
                    ):
                        break
                    yk += dy
                    d += dy
                    if dy_norm == 0 or (rate is not None and rate / (1 - rate) * dy_norm < newton_tol):
                        converged = True
                        break
                    dy_norm_old = dy_norm
                n_iter = k + 1
                if converged:
                    break
                stats["n_newton_fail"] += 1
                if not jac_current and not blew_up:
                    J = J_eval(t_new, y_predict, f(t_new, y_predict))
                    jac_current = True
                    LU = None
                    continue
                if not cfg.adaptive:
                    if blew_up:
                        raise NumericalBlowupError(f"non-finite rhs near t={t_new:.6g}")
                    raise StiffFailureError(
                        f"Newton iteration failed at fixed step h={h:.3e}, t={t:.6g}",
                        {"t": t, "h": h, "order": order},
                    )
                factor = 0.5
                h *= factor
                if h < cfg.h_min:
                    if blew_up:
                        raise NumericalBlowupError(
                            f"non-finite rhs persists down to h_min at t={t:.6g}"
                        )
                    raise StiffFailureError(
                        f"Newton iteration did not converge at h_min, t={t:.6g}",
                        {"t": t, "h": h, "order": order, "stats": dict(stats)},
                    )
                _change_D(D, order, factor)
                n_equal_steps = 0
                LU = None
                t_new = t + h
                y_predict = np.sum(D[: order + 1], axis=0)
                scale = atol + rtol * np.abs(y_predict)
                psi = np.dot(D[1: order + 1].T, gamma[1: order + 1]) / alpha[order]
                c = h / alpha[order]

            safety = 0.9 * (2 * newton_maxiter + 1) / (2 * newton_maxiter + n_iter)

            y_new = yk
            if nonneg.any():
                low = nonneg & (y_new < -atol)
                if low.any() and cfg.adaptive:
                    stats["n_nonneg_reject"] += 1
                    stats["n_rejected"] += 1
                    h *= 0.5
                    _change_D(D, order, 0.5)
                    n_equal_steps = 0
                    LU = None
                    continue
                clip = nonneg & (y_new < 0)
                if clip.any():
                    y_new = y_new.copy()
                    y_new[clip] = 0.0
                    d = y_new - y_predict

            scale = atol + rtol * np.abs(y_new)
            error = error_const[order] * d
            error_norm = _rms(error / scale)
            if cfg.adaptive and error_norm > 1:
                factor = max(MIN_FACTOR, safety * error_norm ** (-1 / (order + 1)))
                h *= factor
                _change_D(D, order, factor)
                n_equal_steps = 0
                LU = None
                stats["n_rejected"] += 1
                continue
            step_accepted = True

        # accept
        stats["n_steps"] += 1
        stats["order_hist"][order] += 1
        jac_current = False
        n_equal_steps += 1
        t = t_new
        y = y_new
        D[order + 2] = d - D[order + 1]
        D[order + 1] = d
        for i in reversed(range(order + 1)):
            D[i] += D[i + 1]

        newly = freeze_mask & ~frozen & (y == 0.0)
        if newly.any():
            frozen |= newly
            for k in np.flatnonzero(newly):
                diag["pruned"].append((t, int(k)))
        if frozen.any():
            y[frozen] = 0.0
            D[:, frozen] = 0.0

        if stats["n_steps"] % cfg.snapshot_every == 0:
            ts.append(t)
            ys.append(y.copy())

        f_new = f(t, y)
        if not np.all(np.isfinite(f_new)):
            raise NumericalBlowupError(f"non-finite rhs at accepted state t={t:.6g}")
        if steady_now(y, f_new):
            return finish(True, t)
        if t >= t_max:
            return finish(False, None)

        # step size and order selection
        if not cfg.adaptive:
            if n_equal_steps >= order + 1 and order < max_order:
                order += 1
                n_equal_steps = 0
            continue
        if n_equal_steps < order + 1:
            if h > cfg.h_max:
                factor = cfg.h_max / h
                h *= factor
                _change_D(D, order, factor)
                n_equal_steps = 0
                LU = None
            continue

        if order > 1:
            error_m_norm = _rms(error_const[order - 1] * D[order] / scale)
        else:
            error_m_norm = np.inf
        if order < max_order:
            error_p_norm = _rms(error_const[order + 1] * D[order + 2] / scale)
        else:
            error_p_norm = np.inf
        error_norms = np.array([error_m_norm, error_norm, error_p_norm])
        with np.errstate(divide="ignore"):
            factors = error_norms ** (-1 / np.arange(order, order + 3))
        delta_order = int(np.argmax(factors)) - 1
        order += delta_order
        factor = min(MAX_FACTOR, safety * float(np.max(factors)))
        factor = min(factor, cfg.h_max / h)
        h *= factor
        _change_D(D, order, factor)
        n_equal_steps = 0
        LU = None
