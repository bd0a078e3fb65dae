"""Benchmark problems and JSON configuration files.

Built-in problems
-----------------
``mech1``
    Force inverter on the unit square (default 400 x 400).  Clamps at both
    left-edge corners, input force ``(-2, 0)`` centred on the left edge,
    output force ``(-1, 0)`` centred on the right edge.
``mech2``
    Gripper on a 2 x 1 rectangle (default 600 x 300).  Same clamps, input
    force ``(1, 0)`` centred on the left edge, two output jaws on the
    right edge loaded with unit forces towards each other.
``heat``
    Heat dissipation on the unit square (default 600 x 600) with zero
    temperature on a centred segment of length 1/5 of the left edge and a
    horizontal initial strip of width 1/5.

Port widths and clamp heights are 1/20 of the edge.  Port loads are total
forces spread uniformly over the port, so the traction is force / width.  The volume fractions
(0.3 for mechanisms, 0.4 for heat) are defaults chosen here, not values
taken from a reference run; override them when comparing against other
results.

Config file schema (version 1)
------------------------------
A JSON object with keys ``schema_version``, ``name``, ``physics``
(``"mechanism"`` or ``"heat"``), ``grid`` (``nx``, ``ny``, ``lx``, ``ly``),
``boundary`` (list of segments with ``edge``, ``start``, ``end``, ``kind``
and optionally ``vector``, ``value``, ``load``), ``material`` (fields of
:class:`ElasticMaterial` or :class:`HeatMaterial`), ``params`` (fields of
:class:`PenaltyParams`; ``beta`` is required), ``initial`` (``kind`` one of
``uniform``, ``strip`` with ``axis``/``center``/``width``, or ``file`` with
``path``) and ``solver`` (``"direct"`` or ``"cg"``).  Unknown keys are
rejected.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .grid import BoundarySegment, BoundarySpec, Grid, GridSpec
from .material import ElasticMaterial, HeatMaterial
from .objective import HeatTransfer, Mechanism, PenaltyParams

SCHEMA_VERSION = 1
PHYSICS = ("mechanism", "heat")
SOLVERS = ("direct", "cg")

E_MAX = 5000.0 * 8.0 / 3.0
PORT = 0.05


@dataclass(frozen=True)
class InitialDesign:
    kind: str = "uniform"
    axis: str = "x"
    center: float = 0.5
    width: float = 0.2
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "strip", "file"):
            raise ConfigurationError(f"unknown initial design kind {self.kind!r}")
        if self.kind == "strip":
            if self.axis not in ("x", "y"):
                raise ConfigurationError("strip axis must be 'x' or 'y'")
            if not 0 < self.width <= 1 or not 0 <= self.center <= 1:
                raise ConfigurationError("strip center and width are fractions in [0, 1]")
        if self.kind == "file" and not self.path:
            raise ConfigurationError("file initial design needs a path")


@dataclass(frozen=True)
class ProblemConfig:
    name: str
    physics: str
    grid: GridSpec
    bcs: BoundarySpec
    material: ElasticMaterial | HeatMaterial
    params: PenaltyParams
    initial: InitialDesign = field(default_factory=InitialDesign)
    solver: str = "direct"

    def __post_init__(self):
        if self.physics not in PHYSICS:
            raise ConfigurationError(f"unknown physics {self.physics!r}")
        want = ElasticMaterial if self.physics == "mechanism" else HeatMaterial
        if not isinstance(self.material, want):
            raise ConfigurationError(f"{self.physics} problem needs a {want.__name__}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}")

    def scaled(self, nx: int, ny: int | None = None) -> "ProblemConfig":
        """Same problem on a different mesh; every non-mesh parameter is kept."""
        spec = self.grid.scaled(nx) if ny is None else GridSpec(nx, ny, self.grid.lx, self.grid.ly)
        return replace(self, grid=spec)

    def build(self, params: PenaltyParams | None = None, method: str | None = None):
        """Discretized physics object for this configuration."""
        grid = Grid(self.grid)
        cls = Mechanism if self.physics == "mechanism" else HeatTransfer
        return cls(grid, self.bcs, self.material, params or self.params, method or self.solver)

    def initial_design(self) -> np.ndarray:
        ny, nx = self.grid.ny, self.grid.nx
        init = self.initial
        if init.kind == "uniform":
            return np.full((ny, nx), self.params.beta)
        if init.kind == "file":
            from .io import read_design
            return read_design(init.path, (ny, nx))
        # strip of cells whose centroid lies within center +- width/2 across the axis
        if init.axis == "x":
            coord = (np.arange(ny) + 0.5) / ny
            band = np.abs(coord - init.center) < 0.5 * init.width
            return np.repeat(band[:, None], nx, axis=1).astype(float)
        coord = (np.arange(nx) + 0.5) / nx
        band = np.abs(coord - init.center) < 0.5 * init.width
        return np.repeat(band[None, :], ny, axis=0).astype(float)


def _clamps():
    return [BoundarySegment("left", 0.0, PORT, "clamp"),
            BoundarySegment("left", 1.0 - PORT, 1.0, "clamp")]


def _port(edge, center=0.5, width=PORT):
    return center - 0.5 * width, center + 0.5 * width


def model_problem_1(nx: int = 400, formulation: str = "stress") -> ProblemConfig:
    """Force inverter."""
    lam = 1.0 if formulation == "stress" else 25.0
    segs = _clamps() + [
        BoundarySegment("left", *_port("left"), "traction", (-2.0 / PORT, 0.0), load="in"),
        BoundarySegment("right", *_port("right"), "traction", (-1.0 / PORT, 0.0), load="out"),
    ]
    return ProblemConfig(
        "mech1", "mechanism", GridSpec(nx, nx, 1.0, 1.0), BoundarySpec(segs),
        ElasticMaterial(E_MAX, 1e-5 * E_MAX, 0.3),
        PenaltyParams(lam=lam, gamma=0.1, beta=0.3, formulation=formulation))


def model_problem_2(nx: int = 600, formulation: str = "stress") -> ProblemConfig:
    """Gripper on a 2:1 domain."""
    lam = 1.0 if formulation == "stress" else 25.0
    segs = _clamps() + [
        BoundarySegment("left", *_port("left"), "traction", (1.0 / PORT, 0.0), load="in"),
        BoundarySegment("right", 0.55, 0.60, "traction", (0.0, 1.0 / PORT), load="out"),
        BoundarySegment("right", 0.40, 0.45, "traction", (0.0, -1.0 / PORT), load="out"),
    ]
    return ProblemConfig(
        "mech2", "mechanism", GridSpec(nx, nx // 2, 2.0, 1.0), BoundarySpec(segs),
        ElasticMaterial(E_MAX, 1e-5 * E_MAX, 0.3),
        PenaltyParams(lam=lam, gamma=0.1, beta=0.3, formulation=formulation))


def heat_benchmark(nx: int = 600, p: float | None = None) -> ProblemConfig:
    """Heat dissipation with a hot background and a conducting phase."""
    mat = HeatMaterial(10.0, 1.0, 1.0, 100.0) if p is None else \
        HeatMaterial(10.0, 1.0, 1.0, 100.0, interp_kappa="gmif", p=p)
    segs = [BoundarySegment("left", 0.4, 0.6, "temperature", value=0.0)]
    return ProblemConfig(
        "heat", "heat", GridSpec(nx, nx, 1.0, 1.0), BoundarySpec(segs), mat,
        PenaltyParams(lam=0.1, gamma=0.1, beta=0.4),
        InitialDesign("strip", "x", 0.5, 0.2))


BUILTINS = {"mech1": model_problem_1, "mech2": model_problem_2, "heat": heat_benchmark}


def get_builtin(name: str) -> ProblemConfig:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown builtin problem {name!r}; choose from {', '.join(BUILTINS)}") from None


# --- serialization -------------------------------------------------------------

def _fields(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _strict(section: str, data, cls, required=()):
    if not isinstance(data, dict):
        raise ConfigurationError(f"'{section}' must be an object")
    unknown = set(data) - _fields(cls)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigurationError(f"missing key(s) in '{section}': {', '.join(missing)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"invalid '{section}': {exc}") from None


def config_to_dict(cfg: ProblemConfig) -> dict:
    def clean(obj):
        return {k: v for k, v in dataclasses.asdict(obj).items() if v is not None}

    segs = []
    for s in cfg.bcs.segments:
        d = clean(s)
        if "vector" in d:
            d["vector"] = list(d["vector"])
        segs.append(d)
    return {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "physics": cfg.physics,
        "grid": dataclasses.asdict(cfg.grid),
        "boundary": segs,
        "material": clean(cfg.material),
        "params": clean(cfg.params),
        "initial": clean(cfg.initial),
        "solver": cfg.solver,
    }


_TOP_KEYS = {"schema_version", "name", "physics", "grid", "boundary", "material",
             "params", "initial", "solver"}


def config_from_dict(data: dict, base_dir: str = ".") -> ProblemConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    for key in ("physics", "grid", "boundary", "material", "params"):
        if key not in data:
            raise ConfigurationError(f"missing required key '{key}'")
    physics = data["physics"]
    if physics not in PHYSICS:
        raise ConfigurationError(f"unknown physics {physics!r}")

    grid = _strict("grid", data["grid"], GridSpec, required=("nx", "ny"))
    if not isinstance(data["boundary"], list):
        raise ConfigurationError("'boundary' must be a list of segments")
    segs = []
    for i, s in enumerate(data["boundary"]):
        if isinstance(s, dict) and "vector" in s and s["vector"] is not None:
            s = dict(s, vector=tuple(s["vector"]))
        segs.append(_strict(f"boundary[{i}]", s, BoundarySegment,
                            required=("edge", "start", "end", "kind")))
    mat_cls = ElasticMaterial if physics == "mechanism" else HeatMaterial
    mat_req = ("e_max", "e_min") if physics == "mechanism" else ("kappa1", "kappa2", "q1", "q2")
    material = _strict("material", data["material"], mat_cls, required=mat_req)
    params = _strict("params", data["params"], PenaltyParams, required=("beta",))
    initial = _strict("initial", data.get("initial", {}), InitialDesign)
    if initial.kind == "file" and not os.path.isabs(initial.path):
        initial = replace(initial, path=os.path.join(base_dir, initial.path))
    return ProblemConfig(str(data.get("name", "custom")), physics, grid, BoundarySpec(segs),
                         material, params, initial, data.get("solver", "direct"))


def load_config(path) -> ProblemConfig:
    """Read and validate a JSON problem configuration."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}") from None
    return config_from_dict(data, os.path.dirname(os.path.abspath(path)))


def save_config(cfg: ProblemConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
