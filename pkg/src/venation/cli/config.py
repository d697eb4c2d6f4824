"""Run configurations: schema, YAML parsing, canonical JSON and placement logic.

A config is a YAML (or JSON) mapping validated by pydantic.  Every parse or
validation failure is re-raised as :class:`~venation.errors.ConfigError`
with the offending position (line/column for syntax errors, key path for
schema errors).

Random initial data use numpy's PCG64 generator seeded from ``seed``.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError

__all__ = [
    "GridSpec",
    "Placement",
    "FieldInit",
    "InitialSpec",
    "ParamsSpec",
    "IntegratorSpec",
    "ContinuumSpec",
    "OutputSpec",
    "CheckSpec",
    "SweepSpec",
    "RunConfig",
    "parse_config",
    "load_config",
    "canonical_json",
    "apply_override",
    "named_point",
    "region_mask",
    "field_values",
    "initial_values",
]

Axis = Literal["x", "y"]
Point = tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSpec(_Strict):
    """Network or tensor grid.

    ``diamond`` uses ``rows x cols``; ``rectangle``/``round``/``oval`` use
    ``resolution``; ``tensor`` (continuum only) uses ``nx x ny`` cells.
    """

    shape: Literal["diamond", "rectangle", "round", "oval", "tensor"] = "diamond"
    rows: int = Field(9, ge=2)
    cols: int = Field(9, ge=2)
    resolution: int = Field(9, ge=2)
    nx: int = Field(32, ge=2)
    ny: int = Field(32, ge=2)
    bbox: tuple[float, float, float, float] = (-0.5, 2.0, -1.5, 0.5)


class Placement(_Strict):
    """Where a source or sink acts and how strong it is.

    Regions:

    ``all``
        every vertex.
    ``halfplane``
        vertices with ``min <= pos[axis] <= max`` (either bound optional).
    ``vertices``
        explicit ``ids``.
    ``point``
        the vertex nearest to ``at`` (coordinates or a named point such as
        ``top`` or ``bottom_left``).
    ``segment``
        the vertex nearest to ``start + fraction * (end - start)``.
    ``disc``
        vertices within ``radius`` of ``at``.
    ``complement``
        vertices where no source acts (``S == 0`` after sources are placed).
    """

    region: Literal["all", "halfplane", "vertices", "point", "segment", "disc", "complement"]
    strength: float
    axis: Optional[Axis] = None
    min: Optional[float] = None
    max: Optional[float] = None
    ids: Optional[list[int]] = None
    at: Optional[str | Point] = None
    start: Optional[str | Point] = None
    end: Optional[str | Point] = None
    fraction: Optional[float] = Field(None, ge=0.0, le=1.0)
    radius: Optional[float] = Field(None, gt=0.0)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _needs(self):
        need = {
            "halfplane": ["axis"],
            "vertices": ["ids"],
            "point": ["at"],
            "segment": ["start", "end", "fraction"],
            "disc": ["at", "radius"],
        }.get(self.region, [])
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"region {self.region!r} requires {', '.join(missing)}")
        if self.region == "halfplane" and self.min is None and self.max is None:
            raise ValueError("halfplane needs min and/or max")
        return self


class FieldInit(_Strict):
    """Initial data for one field.

    ``constant``: ``value``.  ``uniform_perturbation``: ``value + eps*U(0,1)``.
    ``bernoulli``: ``theta + offset*eps`` with ``P(theta=1) = p``.
    ``scaled_uniform``: ``eps*U(0,1)``.  ``values``: explicit list.
    """

    kind: Literal["constant", "uniform_perturbation", "bernoulli", "scaled_uniform", "values"] = "constant"
    value: float = 1.0
    eps: float = 0.0
    p: float = Field(0.2, ge=0.0, le=1.0)
    offset: float = 1e-5
    values: Optional[list[float]] = None

    @property
    def random(self) -> bool:
        return self.kind in ("uniform_perturbation", "bernoulli", "scaled_uniform")

    @model_validator(mode="after")
    def _vals(self):
        if self.kind == "values" and self.values is None:
            raise ValueError("kind 'values' requires a values list")
        return self


class InitialSpec(_Strict):
    """``a`` is the vertex field (auxin, pressure or s), ``X`` the edge field."""

    a: FieldInit = FieldInit()
    X: FieldInit = FieldInit()


class ParamsSpec(_Strict):
    delta: float = Field(1.0, gt=0)
    sigma: float = Field(1.0, ge=0)
    kappa: float = Field(2.0, ge=0)
    gamma: float = Field(0.5, gt=0)
    tau: float = Field(1.0, ge=0)
    nu: Optional[float] = Field(None, gt=0)
    bigD2: float = Field(1e-3, ge=0)
    cell_volume: float = Field(1.0, gt=0)
    wall_area: float = Field(1.0, gt=0)
    mitchison_rate: float = Field(1.0, ge=0)


class IntegratorSpec(_Strict):
    rtol: float = 1e-6
    atol: float = 1e-9
    max_order: int = Field(5, ge=1, le=5)
    h_init: Optional[float] = None
    h_min: float = 1e-12
    h_max: Optional[float] = None
    t_max: float = 1e6
    formula: Literal["ndf", "bdf"] = "ndf"
    adaptive: bool = True
    steady_tol: float = 1e-8
    snapshot_every: int = Field(50, ge=1)
    max_steps: int = 1_000_000


class ContinuumSpec(_Strict):
    t_max: float = 10.0
    h: float = 0.01
    mode: Literal["elliptic", "parabolic"] = "elliptic"
    snapshot_every: int = Field(100, ge=1)
    steady_tol: float = 1e-8
    x_init: float = 1.0
    a_init: float = 0.0


class OutputSpec(_Strict):
    svg: bool = True
    w_min: float = 0.5
    w_max: float = 8.0
    omit_zero: bool = False
    edge_cmap: str = "viridis"
    vertex_cmap: str = "Oranges"


class CheckSpec(_Strict):
    """Which analysis results count as hard failures (exit status 1).

    ``extent_threshold`` defaults to the unit reference activity: the
    pattern is the set of edges reinforced above it.
    """

    symmetry_axis: Optional[Axis] = None
    symmetry_tol: float = 1e-6
    murray_tol: float = 1e-6
    require_steady: bool = False
    extent_threshold: float = 1.0
    atol: float = 1e-8
    energy_rtol: float = 1e-6
    conservation_tol: Optional[float] = None


class SweepSpec(_Strict):
    """Default sweep axis.  With a list of keys the values are zipped:
    each entry of ``values`` is then a list with one value per key."""

    key: str | list[str]
    values: list[Any]

    @model_validator(mode="after")
    def _shape(self):
        if isinstance(self.key, list):
            for v in self.values:
                if not isinstance(v, list) or len(v) != len(self.key):
                    raise ValueError(f"each value must list {len(self.key)} entries")
        return self


class RunConfig(_Strict):
    name: str = "run"
    description: Optional[str] = None
    model: Literal["primary", "hu_cai", "mitchison", "continuum"] = "primary"
    grid: GridSpec = GridSpec()
    params: ParamsSpec = ParamsSpec()
    sources: list[Placement] = Field(default_factory=list)
    sinks: list[Placement] = Field(default_factory=list)
    initial: InitialSpec = InitialSpec()
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    integrator: IntegratorSpec = IntegratorSpec()
    continuum: ContinuumSpec = ContinuumSpec()
    outputs: OutputSpec = OutputSpec()
    checks: CheckSpec = CheckSpec()
    sweep: Optional[SweepSpec] = None

    @model_validator(mode="after")
    def _consistency(self):
        if (self.initial.a.random or self.initial.X.random) and self.seed is None:
            raise ValueError("seed is mandatory when initial data are random")
        if self.model == "continuum" and self.grid.shape != "tensor":
            raise ValueError("the continuum model needs grid.shape 'tensor'")
        if self.model != "continuum" and self.grid.shape == "tensor":
            raise ValueError("grid.shape 'tensor' is only valid for the continuum model")
        return self


def _loc(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse YAML/JSON text into a validated :class:`RunConfig`."""
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: {exc.problem or exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    return config_from_dict(data, source)


def config_from_dict(data: dict, source: str = "<config>") -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        lines = [f"{source}: {_loc(e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("\n".join(lines)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def canonical_json(cfg: RunConfig) -> str:
    """Canonical JSON: every field explicit, keys sorted."""
    data = cfg.model_dump(mode="json")
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _coerce(value: str):
    try:
        return yaml.safe_load(value)
    except yaml.YAMLError:
        return value


def apply_override(cfg: RunConfig, key: str, value) -> RunConfig:
    """Return a copy of ``cfg`` with dotted ``key`` set to ``value``.

    List items are addressed by index, e.g. ``sources.0.strength``.  String
    values are read as YAML scalars so ``"2.5"`` becomes a float.
    """
    if isinstance(value, str):
        value = _coerce(value)
    data = copy.deepcopy(cfg.model_dump(mode="python"))
    node = data
    parts = key.split(".")
    for part in parts[:-1]:
        try:
            node = node[int(part)] if isinstance(node, list) else node.setdefault(part, {})
        except (IndexError, ValueError):
            raise ConfigError(f"cannot set {key}: no list item {part!r}") from None
        if node is None:
            raise ConfigError(f"cannot set {key}: {part} is null")
    last = parts[-1]
    try:
        if isinstance(node, list):
            node[int(last)] = value
        else:
            if last not in node:
                raise ConfigError(f"unknown key {key!r}")
            node[last] = value
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"cannot set {key}: {exc}") from exc
    return config_from_dict(data, f"override {key}")


# ---------------------------------------------------------------- placements

_NAMED = {
    # (fraction along x, fraction along y); x runs top to bottom
    "top": (0.0, 0.5),
    "bottom": (1.0, 0.5),
    "left": (0.5, 0.0),
    "right": (0.5, 1.0),
    "center": (0.5, 0.5),
    "top_left": (0.0, 0.0),
    "top_right": (0.0, 1.0),
    "bottom_left": (1.0, 0.0),
    "bottom_right": (1.0, 1.0),
}


def named_point(name, bbox) -> np.ndarray:
    """Coordinates of a named point of the bounding box, or pass-through."""
    if not isinstance(name, str):
        return np.asarray(name, dtype=float)
    try:
        fx, fy = _NAMED[name]
    except KeyError:
        raise ConfigError(f"unknown named point {name!r}; choose from {sorted(_NAMED)}") from None
    xmin, xmax, ymin, ymax = bbox
    return np.array([xmin + fx * (xmax - xmin), ymin + fy * (ymax - ymin)])


def _nearest(pos, pt) -> int:
    d = np.sum((pos - pt) ** 2, axis=1)
    return int(np.argmin(d))  # ties go to the lowest index


def region_mask(pl: Placement, pos: np.ndarray, bbox, S=None) -> np.ndarray:
    """Boolean mask of the vertices (or cells) selected by a placement."""
    n = len(pos)
    m = np.zeros(n, dtype=bool)
    if pl.region == "all":
        m[:] = True
    elif pl.region == "halfplane":
        c = pos[:, 0 if pl.axis == "x" else 1]
        m[:] = True
        if pl.min is not None:
            m &= c >= pl.min
        if pl.max is not None:
            m &= c <= pl.max
    elif pl.region == "vertices":
        ids = np.asarray(pl.ids, dtype=int)
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise ConfigError(f"vertex id out of range 0..{n - 1}")
        m[ids] = True
    elif pl.region == "point":
        m[_nearest(pos, named_point(pl.at, bbox))] = True
    elif pl.region == "segment":
        a, b = named_point(pl.start, bbox), named_point(pl.end, bbox)
        m[_nearest(pos, a + pl.fraction * (b - a))] = True
    elif pl.region == "disc":
        c = named_point(pl.at, bbox)
        m = np.sum((pos - c) ** 2, axis=1) <= pl.radius ** 2
    elif pl.region == "complement":
        if S is None:
            raise ConfigError("'complement' is only meaningful for sinks")
        m = np.asarray(S) == 0
    return m


def field_values(placements, pos, bbox, S=None) -> np.ndarray:
    """Fold placements in order; later ones overwrite earlier ones."""
    out = np.zeros(len(pos))
    for pl in placements:
        out[region_mask(pl, pos, bbox, S)] = pl.strength
    return out


def initial_values(spec: FieldInit, n: int, rng: np.random.Generator | None) -> np.ndarray:
    if spec.kind == "constant":
        return np.full(n, spec.value)
    if spec.kind == "values":
        v = np.asarray(spec.values, dtype=float)
        if v.shape != (n,):
            raise ConfigError(f"initial values have length {v.size}, expected {n}")
        return v
    if rng is None:
        raise ConfigError("random initial data need a seed")
    if spec.kind == "uniform_perturbation":
        return spec.value + spec.eps * rng.random(n)
    if spec.kind == "scaled_uniform":
        return spec.eps * rng.random(n)
    theta = (rng.random(n) < spec.p).astype(float)
    return theta + spec.offset * spec.eps
