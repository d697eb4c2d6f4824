"""Command line entry point.

Verbs::

    venation run <config> [--out DIR]
    venation sweep <config> --axis key=v1,v2,... [--axis ...] [--out DIR] [--workers N]
    venation render <state.csv> <graph.json> [--time T] [-o out.svg]
    venation check <result-dir>

Results go to ``--out`` or ``$VENATION_OUTPUT_ROOT/<name>`` (default root
``./runs``).  Exit codes: 0 ok, 1 invariant violation, 2 config error,
3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ..dynamics import NetworkState
from ..errors import ConfigError, ConservationError
from ..io import read_graph, read_state_csv
from .config import load_config
from .render import RenderOptions, render_svg
from .runner import check_result, run_config
from .sweep import parse_axis, sweep

log = logging.getLogger("venation")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
OUTPUT_ROOT_ENV = "VENATION_OUTPUT_ROOT"


def _out_dir(arg, name) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / name


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out, cfg.name)
    res = run_config(cfg, out)
    a = res.analysis
    print(f"{cfg.name}: steady={a.get('steady')} steady_time={a.get('steady_time')} -> {out}")
    for v in res.violations:
        print(f"violation: {v}", file=sys.stderr)
    return res.exit_code


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.axis:
        axes = [parse_axis(a) for a in args.axis]
    elif cfg.sweep is not None:
        axes = [(cfg.sweep.key, cfg.sweep.values)]
    else:
        raise ConfigError("no --axis given and the config has no sweep section")
    out = _out_dir(args.out, cfg.name + "_sweep")
    rows = sweep(cfg, axes, out, max_workers=args.workers)
    for r in rows:
        print(f"{r['run']}: {r['status']} extent={r.get('pattern_extent')} steady={r.get('steady')}")
    print(f"summary: {out / 'summary.csv'}")
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_VIOLATION


def _sibling(path: Path):
    other = {"nodes.csv": "edges.csv", "edges.csv": "nodes.csv"}.get(path.name)
    if other is None:
        raise ConfigError(f"{path}: expected nodes.csv or edges.csv")
    nodes, edges = (path, path.with_name(other)) if path.name == "nodes.csv" else (path.with_name(other), path)
    return nodes, edges


def cmd_render(args) -> int:
    g = read_graph(args.graph)
    nodes, edges = _sibling(Path(args.state))
    states = read_state_csv(nodes, edges, g)
    if not states:
        raise ConfigError(f"{args.state}: no snapshots")
    times = np.array(list(states))
    t = times[-1] if args.time is None else times[np.argmin(np.abs(times - args.time))]
    a, X = states[t]
    opts = RenderOptions(w_min=args.w_min, w_max=args.w_max, omit_zero=args.omit_zero)
    svg = render_svg(g, NetworkState(np.nan_to_num(a), np.nan_to_num(X), float(t)), opts)
    if args.output:
        Path(args.output).write_text(svg)
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def cmd_check(args) -> int:
    res = check_result(args.result_dir)
    print(json.dumps({"passed": not res.violations, "violations": res.violations}, indent=2))
    return res.exit_code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="venation", description="Adaptive transport network simulations")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run one config")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a config over parameter values")
    p.add_argument("config")
    p.add_argument("--axis", action="append", help="key=v1,v2,... (repeat for a grid)")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="draw a stored snapshot as SVG")
    p.add_argument("state", help="nodes.csv or edges.csv of a result directory")
    p.add_argument("graph", help="graph.json")
    p.add_argument("--time", type=float, help="snapshot time (default: last)")
    p.add_argument("-o", "--output")
    p.add_argument("--w-min", type=float, default=0.5)
    p.add_argument("--w-max", type=float, default=8.0)
    p.add_argument("--omit-zero", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("check", help="re-run the analysis of a result directory")
    p.add_argument("result_dir")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ConservationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
