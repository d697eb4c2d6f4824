"""Parameter sweeps over a config template.

Each combination of axis values is run in its own subdirectory; failures are
recorded in the summary row and do not stop the sweep.
"""
from __future__ import annotations

import csv
import itertools
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..errors import ConfigError, ConservationError
from .config import RunConfig, apply_override
from .runner import run_config

__all__ = ["parse_axis", "sweep", "SUMMARY_FIELDS"]

SUMMARY_FIELDS = [
    "run",
    "exit_code",
    "status",
    "steady",
    "steady_time",
    "pattern_extent",
    "murray_max_relative_residual",
    "n_violations",
    "error",
]


def parse_axis(text: str):
    """``"params.tau=0.5,2,5"`` -> ``("params.tau", [0.5, 2, 5])``."""
    import yaml

    key, sep, rest = text.partition("=")
    if not sep or not key.strip() or not rest.strip():
        raise ConfigError(f"axis must look like key=v1,v2,...; got {text!r}")
    vals = [yaml.safe_load(v) for v in rest.split(",")]
    for v in vals:
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"axis values must be finite; got {v!r} in {text!r}")
    return key.strip(), vals


def _label(combo) -> str:
    return "__".join(f"{k.replace('.', '-')}={v}" for k, v in combo)


def _one(args):
    cfg_json, combo, out_dir = args
    row = {k: v for k, v in combo}
    row["run"] = _label(combo)
    try:
        cfg = RunConfig.model_validate_json(cfg_json)
        for k, v in combo:
            cfg = apply_override(cfg, k, v)
        res = run_config(cfg, out_dir)
    except Exception as exc:  # recorded, the sweep goes on
        row.update(exit_code=2 if isinstance(exc, (ConfigError, ConservationError)) else 3, status="error",
                   error=f"{type(exc).__name__}: {exc}".splitlines()[0])
        row["traceback"] = traceback.format_exc()
        return row
    a = res.analysis
    row.update(
        exit_code=res.exit_code,
        status="ok" if res.exit_code == 0 else "violation",
        steady=a.get("steady"),
        steady_time=a.get("steady_time"),
        pattern_extent=a.get("pattern_extent"),
        murray_max_relative_residual=(a.get("murray") or {}).get("max_relative_residual"),
        n_violations=len(res.violations),
        error="; ".join(res.violations),
    )
    return row


def _points(key, values):
    # one axis -> list of ((k, v), ...) assignments; list keys are zipped
    if isinstance(key, (list, tuple)):
        return [tuple(zip(key, v)) for v in values]
    return [((key, v),) for v in values]


def sweep(cfg: RunConfig, axes, out_root, *, max_workers: int | None = None) -> list[dict]:
    """Run the cartesian product of ``axes`` (list of ``(key, values)``).

    A key may itself be a list of keys whose values are zipped.  Writes
    ``summary.csv`` into ``out_root`` and returns the rows in input order.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    keys = []
    for k, _ in axes:
        keys += list(k) if isinstance(k, (list, tuple)) else [k]
    combos = [sum(pts, ()) for pts in itertools.product(*(_points(k, v) for k, v in axes))]
    # validate every override up front so typos fail fast
    for combo in combos:
        c = cfg
        for k, v in combo:
            c = apply_override(c, k, v)
    cfg_json = cfg.model_dump_json()
    jobs = [(cfg_json, combo, out_root / _label(combo)) for combo in combos]
    workers = max_workers or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        rows = [_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_one, jobs))

    fields = keys + SUMMARY_FIELDS
    with open(out_root / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return rows
