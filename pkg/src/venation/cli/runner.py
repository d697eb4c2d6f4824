"""Config-driven pipeline: build, integrate, analyse, write artifacts.

Result directory layout::

    config.json      canonical config
    graph.json       network (network models) / grid.json (continuum)
    nodes.csv        t, vertex_id, a       (a = auxin, pressure or s)
    edges.csv        t, edge_i, edge_j, X  (X = activity, conductivity or D)
    fields.csv       t, i, j, a, X1, X2    (continuum only)
    analysis.json    invariant checks and pattern statistics
    final.svg        rendering of the last snapshot

Nothing time- or host-dependent is written, so reruns are byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import analysis as an
from ..continuum import ContinuumField, ContinuumGrid, ContinuumParams, run_continuum
from ..dynamics import HuCaiModel, MitchisonModel, ModelParams, NetworkState, PrimaryModel
from ..errors import ConfigError, NotApplicableError
from ..grid import Graph, build_diamond, build_shape
from ..io import read_field_csv, read_graph, read_json, read_state_csv, write_field_csv, write_graph, write_json, write_state_csv
from ..solver import IntegratorConfig, detect_steady, integrate
from .config import RunConfig, canonical_json, config_from_dict, field_values, initial_values
from .render import RenderOptions, render_svg

__all__ = ["RunOutcome", "build_graph", "build_params", "run_config", "check_result", "analyze"]

MAX_LISTED = 20


@dataclass
class RunOutcome:
    exit_code: int
    out_dir: Path
    analysis: dict
    violations: list = field(default_factory=list)


@dataclass
class _Traj:
    # minimal stand-in for SimulationResult when re-analysing stored snapshots
    t: np.ndarray
    y: np.ndarray


def build_graph(cfg: RunConfig) -> Graph:
    gs = cfg.grid
    if gs.shape == "diamond":
        return build_diamond(gs.rows, gs.cols, gs.bbox)
    return build_shape(gs.shape, gs.resolution, gs.bbox)


def _source_fields(cfg: RunConfig, pos, bbox):
    S = field_values(cfg.sources, pos, bbox)
    sink = field_values(cfg.sinks, pos, bbox, S)
    if np.any(S < 0) or np.any(sink < 0):
        raise ConfigError("source and sink strengths must be nonnegative")
    return S, sink


def build_params(cfg: RunConfig, g: Graph) -> ModelParams:
    """Model constants plus per-vertex ``S``/``I`` from the placements.

    In the primary model sinks set the decay rates ``I``; in the Hu-Cai and
    Mitchison models they enter ``S`` with a negative sign.
    """
    S, sink = _source_fields(cfg, g.positions, g.bbox())
    pr = cfg.params
    kw = dict(
        delta=pr.delta, sigma=pr.sigma, kappa=pr.kappa, gamma=pr.gamma, tau=pr.tau,
        nu=pr.nu, cell_volume=pr.cell_volume, wall_area=pr.wall_area,
        mitchison_rate=pr.mitchison_rate,
    )
    try:
        if cfg.model == "primary":
            return ModelParams(S=S, I=sink, **kw)
        return ModelParams(S=S - sink, **kw)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc


def _integrator(cfg: RunConfig) -> IntegratorConfig:
    d = cfg.integrator.model_dump()
    if d["h_max"] is None:
        d["h_max"] = float("inf")
    try:
        return IntegratorConfig(**d)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc


def _rng(cfg):
    return None if cfg.seed is None else np.random.default_rng(cfg.seed)


def _stats(res) -> dict:
    return {k: v for k, v in res.stats.items() if k != "wall_time"}


def _clip(items):
    return {"count": len(items), "first": list(items[:MAX_LISTED])}


# ------------------------------------------------------------------ analysis

def _analyze_primary(cfg, g, p, traj, steady_time):
    ck = cfg.checks
    model = PrimaryModel(g, p)
    nv = g.n_vertices
    y = traj.y[-1]
    st = NetworkState(y[:nv], y[nv:], float(traj.t[-1]))
    steady = detect_steady(lambda v: model.rhs(0.0, v), y, cfg.integrator.steady_tol)
    viol = []

    bounds = an.check_bounds(traj, p, model=model, atol=ck.atol)
    if bounds.violations:
        viol.append(f"{len(bounds.violations)} bound violations, first {bounds.violations[0]}")
    bd = bounds.to_dict()
    bd["violations"] = _clip(bd["violations"])
    bd["passed"] = bounds.passed

    mr = an.murray_residual(g, p, st, steady_tol=cfg.integrator.steady_tol)
    murray = {
        "max_relative_residual": mr.max_relative_residual,
        "max_general_relative_residual": mr.max_general_relative_residual,
        "max_edge_residual": mr.max_edge_residual,
        "active_edges": mr.active_edges,
        "n_checked_vertices": nv - len(mr.skipped_vertices),
        "steady": mr.steady,
        "warnings": mr.warnings,
    }
    if steady and mr.max_relative_residual > ck.murray_tol:
        viol.append(f"Murray residual {mr.max_relative_residual:.3g} > {ck.murray_tol:g}")

    sym = None
    if ck.symmetry_axis is not None:
        try:
            sym = an.symmetry_error(g, st, ck.symmetry_axis)
        except NotApplicableError as exc:
            viol.append(f"symmetry check not applicable: {exc}")
        else:
            if sym > ck.symmetry_tol:
                viol.append(f"symmetry error {sym:.3g} > {ck.symmetry_tol:g}")
    if ck.require_steady and not steady:
        viol.append("no steady state reached")
    return {
        "steady": steady,
        "steady_time": steady_time,
        "t_final": float(traj.t[-1]),
        "murray": murray,
        "bounds": bd,
        "symmetry_axis": ck.symmetry_axis,
        "symmetry_error": sym,
        "pattern_extent": an.pattern_extent(st, ck.extent_threshold),
        "coverage_overlap": an.coverage_overlap(g, st),
        "max_a": float(st.a.max()),
        "max_X": float(st.X.max()),
    }, viol


def _analyze_hu_cai(cfg, g, p, traj, steady_time, max_kirchhoff=None):
    ck = cfg.checks
    model = HuCaiModel(g, p)
    diss = an.energy_dissipation(traj, model, rtol=ck.energy_rtol)
    y = traj.y[-1]
    steady = detect_steady(lambda v: model.rhs(0.0, v), y, cfg.integrator.steady_tol)
    kres = model.max_kirchhoff_residual if max_kirchhoff is None else max(max_kirchhoff, model.max_kirchhoff_residual)
    viol = []
    if not diss.passed:
        viol.append(f"energy increased by {diss.max_increment:.3g}")
    if kres > 1e-10:
        viol.append(f"Kirchhoff residual {kres:.3g} > 1e-10 |S|")
    if traj.y.min() < -ck.atol:
        viol.append(f"negative conductivity {traj.y.min():.3g}")
    if ck.require_steady and not steady:
        viol.append("no steady state reached")
    return {
        "steady": steady,
        "steady_time": steady_time,
        "t_final": float(traj.t[-1]),
        "energy_initial": float(diss.energies[0]),
        "energy_final": float(diss.energies[-1]),
        "energy_max_increment": diss.max_increment,
        "energy_passed": diss.passed,
        "max_kirchhoff_residual": kres,
        "min_C": float(traj.y.min()),
        "pattern_extent": int(np.count_nonzero(y > ck.extent_threshold)),
    }, viol


def _analyze_mitchison(cfg, g, p, traj, steady_time):
    ck = cfg.checks
    nv = g.n_vertices
    model = MitchisonModel(g, p)
    totals = traj.y[:, :nv].sum(axis=1)
    drift = float(np.max(np.abs(totals - totals[0])))
    conserving = bool(np.all(p.sources(nv) == 0))
    tol = ck.conservation_tol
    if tol is None:
        tol = cfg.integrator.rtol * max(1.0, abs(float(totals[0]))) + cfg.integrator.atol * nv
    viol = []
    if conserving and drift > tol:
        viol.append(f"total s drifted by {drift:.3g} > {tol:.3g}")
    Dmin = float(traj.y[:, nv:].min())
    if Dmin < -ck.atol:
        viol.append(f"negative diffusion constant {Dmin:.3g}")
    steady = detect_steady(lambda v: model.rhs(0.0, v), traj.y[-1], cfg.integrator.steady_tol)
    if ck.require_steady and not steady:
        viol.append("no steady state reached")
    return {
        "steady": steady,
        "steady_time": steady_time,
        "t_final": float(traj.t[-1]),
        "conserving": conserving,
        "total_initial": float(totals[0]),
        "total_drift": drift,
        "conservation_tol": tol,
        "min_D": Dmin,
        "pattern_extent": int(np.count_nonzero(traj.y[-1, nv:] > ck.extent_threshold)),
    }, viol


def _analyze_continuum(cfg, times, min_x, min_x0, tau, steady, steady_time):
    times = np.asarray(times, float)
    min_x = np.asarray(min_x, float)
    bound = min_x0 * np.exp(-tau * times) - 1e-6 * times
    slack = min_x - bound
    viol = []
    if np.any(slack < 0):
        k = int(np.argmin(slack))
        viol.append(f"subsolution bound violated at t={times[k]:.6g}: {min_x[k]:.6g} < {bound[k]:.6g}")
    if cfg.checks.require_steady and not steady:
        viol.append("no steady state reached")
    return {
        "steady": bool(steady),
        "steady_time": steady_time,
        "t_final": float(times[-1]),
        "min_X_final": float(min_x[-1]),
        "subsolution_min_slack": float(slack.min()),
    }, viol


def analyze(cfg: RunConfig, g: Graph, traj, steady_time=None) -> tuple[dict, list]:
    """Analysis block for a network-model trajectory (stored snapshots)."""
    p = build_params(cfg, g)
    if cfg.model == "primary":
        return _analyze_primary(cfg, g, p, traj, steady_time)
    if cfg.model == "hu_cai":
        return _analyze_hu_cai(cfg, g, p, traj, steady_time)
    if cfg.model == "mitchison":
        return _analyze_mitchison(cfg, g, p, traj, steady_time)
    raise ValueError(cfg.model)


# ------------------------------------------------------------------ running

def _finish(out: Path, cfg: RunConfig, body: dict, viol: list) -> RunOutcome:
    body = an._jsonable(body)
    body["model"] = cfg.model
    body["name"] = cfg.name
    body["violations"] = viol
    body["passed"] = not viol
    write_json(out / "analysis.json", body)
    return RunOutcome(0 if not viol else 1, out, body, viol)


def _run_network(cfg: RunConfig, out: Path) -> RunOutcome:
    g = build_graph(cfg)
    p = build_params(cfg, g)
    rng = _rng(cfg)
    icfg = _integrator(cfg)
    a0 = initial_values(cfg.initial.a, g.n_vertices, rng)
    x0 = initial_values(cfg.initial.X, g.n_edges, rng)
    if np.any(x0 < 0):
        raise ConfigError("initial X must be nonnegative")

    if cfg.model == "primary":
        if np.any(a0 < 0):
            raise ConfigError("initial a must be nonnegative")
        model = PrimaryModel(g, p)
        y0 = np.r_[a0, x0]
    elif cfg.model == "hu_cai":
        model = HuCaiModel(g, p)  # raises ConservationError when sum(S) != 0
        y0 = x0
    else:
        model = MitchisonModel(g, p)
        y0 = np.r_[a0, x0]

    res = integrate(model.rhs, y0, icfg, jac=model.jac, nonneg=model.nonneg, freeze=model.freeze,
                    positive=getattr(model, "positive", None))

    write_graph(out / "graph.json", g)
    if cfg.model == "hu_cai":
        snaps = [(t, model.pressures(y), y) for t, y in zip(res.t, res.y)]
        kres = model.max_kirchhoff_residual
    else:
        nv = g.n_vertices
        snaps = [(t, y[:nv], y[nv:]) for t, y in zip(res.t, res.y)]
        kres = None
    write_state_csv(out / "nodes.csv", out / "edges.csv", g, snaps)

    traj = _Traj(np.asarray(res.t), np.asarray(res.y))
    if cfg.model == "primary":
        body, viol = _analyze_primary(cfg, g, p, traj, res.steady_time)
    elif cfg.model == "hu_cai":
        body, viol = _analyze_hu_cai(cfg, g, p, traj, res.steady_time, kres)
    else:
        body, viol = _analyze_mitchison(cfg, g, p, traj, res.steady_time)
    body["integrator"] = _stats(res)

    if cfg.outputs.svg:
        t, a, X = snaps[-1]
        (out / "final.svg").write_text(render_svg(g, NetworkState(a, X, t), _render_opts(cfg)))
    return _finish(out, cfg, body, viol)


def _render_opts(cfg) -> RenderOptions:
    o = cfg.outputs
    return RenderOptions(w_min=o.w_min, w_max=o.w_max, omit_zero=o.omit_zero,
                         edge_cmap=o.edge_cmap, vertex_cmap=o.vertex_cmap, title=cfg.name)


def continuum_params(cfg: RunConfig, grid: ContinuumGrid) -> ContinuumParams:
    x, y = grid.centers()
    pos = np.c_[x.ravel(), y.ravel()]
    S, sink = _source_fields(cfg, pos, grid.bbox)
    I = sink if cfg.sinks else np.ones(len(pos))
    pr = cfg.params
    return ContinuumParams(
        delta=pr.delta, kappa=pr.kappa, gamma=pr.gamma, tau=pr.tau, bigD2=pr.bigD2,
        S=S.reshape(grid.shape), I=I.reshape(grid.shape),
    )


def _run_continuum(cfg: RunConfig, out: Path) -> RunOutcome:
    gs, cs = cfg.grid, cfg.continuum
    grid = ContinuumGrid(gs.bbox, gs.nx, gs.ny)
    p = continuum_params(cfg, grid)
    f0 = ContinuumField.constant(grid, X=cs.x_init, a=cs.a_init)
    res = run_continuum(f0, p, cs.t_max, cs.h, mode=cs.mode,
                        snapshot_every=cs.snapshot_every, steady_tol=cs.steady_tol)
    write_json(out / "grid.json", grid.to_dict())
    path = out / "fields.csv"
    path.unlink(missing_ok=True)
    for t, f in zip(res.times, res.fields):
        write_field_csv(path, f, t)
    body, viol = _analyze_continuum(
        cfg, res.times, [f.min_X() for f in res.fields], f0.min_X(), p.tau, res.steady, res.steady_time
    )
    body["n_steps"] = res.diagnostics["n_steps"]
    body["h_changes"] = res.diagnostics["h_changes"]
    if cfg.outputs.svg:
        (out / "final.svg").write_text(render_field_svg(res.final, _render_opts(cfg)))
    return _finish(out, cfg, body, viol)


def render_field_svg(f: ContinuumField, opts: RenderOptions) -> str:
    """Heat map of auxin with the cell-averaged trace of the tensor as opacity."""
    from matplotlib import colormaps
    from matplotlib.colors import to_hex

    g = f.grid
    x1, x2 = f.cell_X()
    tr = x1 + x2
    tmax = float(tr.max()) or 1.0
    amin, aptp = float(f.a.min()), float(np.ptp(f.a)) or 1.0
    cmap = colormaps[opts.edge_cmap]
    cell = (opts.width - 2 * opts.margin) / max(g.nx, g.ny)
    W = g.ny * cell + 2 * opts.margin
    H = g.nx * cell + 2 * opts.margin
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.1f}" height="{H:.1f}">',
        f'<rect width="{W:.1f}" height="{H:.1f}" fill="white"/>',
    ]
    for i in range(g.nx):
        for j in range(g.ny):
            c = to_hex(cmap((f.a[i, j] - amin) / aptp))
            out.append(
                f'<rect x="{opts.margin + j * cell:.2f}" y="{opts.margin + i * cell:.2f}" '
                f'width="{cell:.2f}" height="{cell:.2f}" fill="{c}" '
                f'fill-opacity="{0.2 + 0.8 * tr[i, j] / tmax:.3f}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def run_config(cfg: RunConfig, out_dir) -> RunOutcome:
    """Run ``cfg`` and write all artifacts into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(canonical_json(cfg))
    if cfg.model == "continuum":
        return _run_continuum(cfg, out)
    return _run_network(cfg, out)


def check_result(result_dir) -> RunOutcome:
    """Re-run the analysis on the stored snapshots of a result directory."""
    d = Path(result_dir)
    try:
        cfg = config_from_dict(read_json(d / "config.json"), str(d / "config.json"))
    except FileNotFoundError as exc:
        raise ConfigError(f"{d}: no config.json") from exc
    if cfg.model == "continuum":
        grid = ContinuumGrid(cfg.grid.bbox, cfg.grid.nx, cfg.grid.ny)
        p = continuum_params(cfg, grid)
        data = read_field_csv(d / "fields.csv")
        times = sorted(data)
        min_x = [min(data[t][1].min(), data[t][2].min()) for t in times]
        stored = read_json(d / "analysis.json") if (d / "analysis.json").exists() else {}
        body, viol = _analyze_continuum(
            cfg, times, min_x, cfg.continuum.x_init, p.tau,
            stored.get("steady", False), stored.get("steady_time"),
        )
        body["checked_from"] = "fields.csv (cell averages)"
        return RunOutcome(0 if not viol else 1, d, an._jsonable(body), viol)

    g = read_graph(d / "graph.json")
    states = read_state_csv(d / "nodes.csv", d / "edges.csv", g)
    t = np.array(list(states))
    if cfg.model == "hu_cai":
        Y = np.array([X for _, X in states.values()])
    else:
        Y = np.array([np.r_[a, X] for a, X in states.values()])
    stored = read_json(d / "analysis.json") if (d / "analysis.json").exists() else {}
    body, viol = analyze(cfg, g, _Traj(t, Y), stored.get("steady_time"))
    body = an._jsonable(body)
    return RunOutcome(0 if not viol else 1, d, body, viol)

