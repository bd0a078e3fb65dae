"""Structured rectangular grids, boundary segments and DOF bookkeeping.

Element fields are stored as ``(ny, nx)`` arrays and nodal fields as
``(ny + 1, nx + 1)`` arrays, both in C order, so element ``e = j * nx + i``
and node ``n = j * (nx + 1) + i`` where ``i`` runs along x and ``j`` along y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

EDGES = ("left", "right", "bottom", "top")
DIRICHLET_KINDS = ("clamp", "roller-normal", "temperature")
NEUMANN_KINDS = ("traction", "insulated")


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ConfigurationError("element counts must be integers")
        if self.nx < 1 or self.ny < 1:
            raise ConfigurationError(f"element counts must be positive, got {self.nx}x{self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ConfigurationError("domain side lengths must be positive")
        hx, hy = self.lx / self.nx, self.ly / self.ny
        if abs(hx - hy) > 1e-12 * max(hx, hy):
            raise ConfigurationError(
                f"cells must be square: lx/nx = {hx!r} but ly/ny = {hy!r}")
        if self.nx < 2 or self.ny < 2:
            raise ConfigurationError(f"need nx >= 2 and ny >= 2, got {self.nx}x{self.ny}")

    @property
    def h(self) -> float:
        return self.lx / self.nx

    def scaled(self, nx: int) -> "GridSpec":
        """Same domain with ``nx`` elements along x and square cells."""
        ny = int(round(nx * self.ly / self.lx))
        return GridSpec(nx, ny, self.lx, self.ly)


class Grid:
    """Node coordinates, counterclockwise element connectivity and centroids."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.nx, self.ny = spec.nx, spec.ny
        self.h = spec.h
        self.n_elements = self.nx * self.ny
        self.n_nodes = (self.nx + 1) * (self.ny + 1)

        i = np.arange(self.nx + 1)
        j = np.arange(self.ny + 1)
        xx, yy = np.meshgrid(i * self.h, j * self.h)
        self.node_xy = np.column_stack([xx.ravel(), yy.ravel()])

        ie, je = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        ie, je = ie.ravel(), je.ravel()
        n0 = je * (self.nx + 1) + ie
        # lower-left, lower-right, upper-right, upper-left
        self.connectivity = np.column_stack(
            [n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])
        self.centroids = np.column_stack(
            [(ie + 0.5) * self.h, (je + 0.5) * self.h])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def area(self) -> float:
        return self.spec.lx * self.spec.ly

    def node(self, i: int, j: int) -> int:
        return j * (self.nx + 1) + i

    def element_dofs(self, dofs_per_node: int) -> np.ndarray:
        """``(n_elements, 4 * dofs_per_node)`` global DOF indices per element."""
        c = self.connectivity
        if dofs_per_node == 1:
            return c.copy()
        return (c[:, :, None] * dofs_per_node
                + np.arange(dofs_per_node)[None, None, :]).reshape(len(c), -1)

    def edge_nodes(self, edge: str) -> np.ndarray:
        """Node ids along an edge, ordered by increasing coordinate."""
        if edge == "bottom":
            return np.array([self.node(i, 0) for i in range(self.nx + 1)])
        if edge == "top":
            return np.array([self.node(i, self.ny) for i in range(self.nx + 1)])
        if edge == "left":
            return np.array([self.node(0, j) for j in range(self.ny + 1)])
        if edge == "right":
            return np.array([self.node(self.nx, j) for j in range(self.ny + 1)])
        raise ConfigurationError(f"unknown edge {edge!r}")


def build_grid(spec: GridSpec) -> Grid:
    return Grid(spec)


@dataclass(frozen=True)
class BoundarySegment:
    """A piece of one domain edge carrying a boundary condition.

    ``start`` and ``end`` are fractions of the edge length measured from the
    edge end nearest the origin.  ``vector`` is a traction per unit length
    (traction segments only), ``value`` a prescribed temperature, and
    ``load`` tags a traction as belonging to the input (``"in"``) or output
    (``"out"``) load case.
    """

    edge: str
    start: float
    end: float
    kind: str
    vector: tuple[float, float] | None = None
    value: float | None = None
    load: str = "in"

    def __post_init__(self):
        if self.edge not in EDGES:
            raise ConfigurationError(f"unknown edge {self.edge!r}")
        if self.kind not in DIRICHLET_KINDS + NEUMANN_KINDS:
            raise ConfigurationError(f"unknown boundary kind {self.kind!r}")
        if not 0.0 <= self.start <= self.end <= 1.0:
            raise ConfigurationError(
                f"segment bounds must satisfy 0 <= start <= end <= 1, got "
                f"({self.start}, {self.end}) on {self.edge}")
        if self.kind == "traction":
            if self.vector is None or len(self.vector) != 2:
                raise ConfigurationError("traction segment needs a 2-vector")
            if self.load not in ("in", "out"):
                raise ConfigurationError(f"traction load must be 'in' or 'out', got {self.load!r}")
        if self.kind == "temperature" and self.value is None:
            raise ConfigurationError("temperature segment needs a value")

    @property
    def is_dirichlet(self) -> bool:
        return self.kind in DIRICHLET_KINDS


@dataclass(frozen=True)
class BoundarySpec:
    segments: tuple[BoundarySegment, ...] = field(default_factory=tuple)

    def __init__(self, segments: Sequence[BoundarySegment] = ()):
        object.__setattr__(self, "segments", tuple(segments))


@dataclass(frozen=True)
class LoadedEdge:
    nodes: tuple[int, int]
    length: float
    vector: tuple[float, float]
    load: str


@dataclass
class ResolvedBoundary:
    """Constrained DOFs with prescribed values plus loaded boundary edges."""

    dofs_per_node: int
    n_dofs: int
    fixed_dofs: np.ndarray
    fixed_values: np.ndarray
    loaded_edges: list[LoadedEdge]

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.fixed_dofs] = False
        return np.flatnonzero(mask)

    def load_vector(self, load: str = "in") -> np.ndarray:
        """Consistent nodal forces of one load case (trapezoidal rule per edge)."""
        f = np.zeros(self.n_dofs)
        d = self.dofs_per_node
        for edge in self.loaded_edges:
            if edge.load != load:
                continue
            for n in edge.nodes:
                for c in range(min(d, 2)):
                    f[n * d + c] += 0.5 * edge.length * edge.vector[c]
        return f

    def loaded_length(self, load: str = "in") -> float:
        return sum(e.length for e in self.loaded_edges if e.load == load)


def _snap(fraction: float, n_cells: int) -> int:
    # round half up, not to even, so results never depend on parity
    return int(math.floor(fraction * n_cells + 0.5))


def resolve_boundary(grid: Grid, bcs: BoundarySpec, dofs_per_node: int = 2) -> ResolvedBoundary:
    """Snap segments to nodes and collect constraints and loaded edges.

    Segment endpoints snap to the nearest node, so the quantization error is
    at most h/2 per endpoint; a traction segment narrower than a cell loads
    the cell containing its midpoint.  Tractions are rescaled so the
    resultant force equals traction times nominal segment length.  A DOF constrained by two segments must carry
    the same prescribed value in both.
    """
    if dofs_per_node not in (1, 2):
        raise ConfigurationError("dofs_per_node must be 1 (heat) or 2 (elasticity)")

    per_edge: dict[str, list[tuple[int, int, BoundarySegment]]] = {e: [] for e in EDGES}
    for seg in bcs.segments:
        nodes = grid.edge_nodes(seg.edge)
        n_cells = len(nodes) - 1
        k0, k1 = _snap(seg.start, n_cells), _snap(seg.end, n_cells)
        if seg.kind == "traction":
            if not seg.end > seg.start:
                raise ConfigurationError(
                    f"traction segment on {seg.edge} [{seg.start}, {seg.end}] has zero length")
            if k1 <= k0:
                # narrower than a cell: load the cell containing the midpoint
                k0 = min(int(math.floor(0.5 * (seg.start + seg.end) * n_cells)), n_cells - 1)
                k1 = k0 + 1
        per_edge[seg.edge].append((k0, k1, seg))

    for edge, items in per_edge.items():
        dirichlet = [(a, b) for a, b, s in items if s.is_dirichlet]
        neumann = [(a, b) for a, b, s in items if s.kind == "traction"]
        for a0, a1 in dirichlet:
            for b0, b1 in neumann:
                if min(a1, b1) - max(a0, b0) > 0:
                    raise ConfigurationError(
                        f"Dirichlet and traction segments overlap on the {edge} edge")

    prescribed: dict[int, float] = {}

    def constrain(dof: int, value: float):
        old = prescribed.get(dof)
        if old is not None and old != value:
            raise ConfigurationError(
                f"DOF {dof} is prescribed twice with different values ({old} vs {value})")
        prescribed[dof] = value

    loaded: list[LoadedEdge] = []
    for edge, items in per_edge.items():
        nodes = grid.edge_nodes(edge)
        normal_component = 0 if edge in ("left", "right") else 1
        for k0, k1, seg in items:
            span = nodes[k0:k1 + 1]
            if seg.kind == "clamp":
                if dofs_per_node != 2:
                    raise ConfigurationError("clamp needs a vector field")
                for n in span:
                    constrain(2 * n, 0.0)
                    constrain(2 * n + 1, 0.0)
            elif seg.kind == "roller-normal":
                if dofs_per_node != 2:
                    raise ConfigurationError("roller-normal needs a vector field")
                for n in span:
                    constrain(2 * n + normal_component, 0.0)
            elif seg.kind == "temperature":
                if dofs_per_node != 1:
                    raise ConfigurationError("temperature needs a scalar field")
                for n in span:
                    constrain(int(n), float(seg.value))
            elif seg.kind == "traction":
                if dofs_per_node != 2:
                    raise ConfigurationError("traction needs a vector field")
                # keep the resultant force of the nominal segment
                scale = (seg.end - seg.start) * (len(nodes) - 1) / (k1 - k0)
                vec = (float(seg.vector[0]) * scale, float(seg.vector[1]) * scale)
                for a, b in zip(span[:-1], span[1:]):
                    loaded.append(LoadedEdge((int(a), int(b)), grid.h, vec, seg.load))
            # insulated: natural boundary, nothing to do

    dofs = np.array(sorted(prescribed), dtype=np.int64)
    values = np.array([prescribed[d] for d in dofs], dtype=float)
    return ResolvedBoundary(dofs_per_node, grid.n_nodes * dofs_per_node, dofs, values, loaded)
