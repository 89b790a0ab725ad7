"""Uniform Cartesian discretization of the unit square.

Nodes sit at ``(i*h, j*h)`` for ``i, j = 0..n+1`` with ``h = 1/(n+1)``.  The
four corners are dropped: they carry no outward normal and no interior
neighbour uses them in the five-point stencil.

Storage order of a :class:`GridFunction`
    interior nodes row-major (``x`` fastest), then boundary nodes in circuit
    order.  The circuit runs counterclockwise starting at ``(h, 0)``:
    bottom edge left to right, right edge bottom to top, top edge right to
    left, left edge top to bottom.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, MetadataMismatch

MIN_NODES = 8


@dataclass(frozen=True)
class BoundaryIndex:
    """Boundary circuit of a :class:`GridSpec`.

    ``nodes`` are storage indices of the boundary nodes; ``inner1`` and
    ``inner2`` are the storage indices of the first and second nodes met when
    walking inward along the normal line.
    """

    xy: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    arclength: np.ndarray
    nodes: np.ndarray
    inner1: np.ndarray
    inner2: np.ndarray
    grid_ij: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def z(self) -> np.ndarray:
        return self.xy[:, 0] + 1j * self.xy[:, 1]


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise ConfigurationError(
                f"grid needs at least {MIN_NODES} interior nodes per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def n_interior(self) -> int:
        return self.n * self.n

    @property
    def n_boundary(self) -> int:
        return 4 * self.n

    @property
    def n_nodes(self) -> int:
        return self.n_interior + self.n_boundary

    @cached_property
    def index_map(self) -> np.ndarray:
        """``(n+2, n+2)`` table, indexed ``[i, j]``, of storage indices; -1 at corners."""
        n = self.n
        table = -np.ones((n + 2, n + 2), dtype=np.int64)
        ii, jj = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="xy")
        table[ii.ravel(), jj.ravel()] = np.arange(n * n)
        table[tuple(self.boundary_ij.T)] = n * n + np.arange(4 * n)
        return table

    @cached_property
    def boundary_ij(self) -> np.ndarray:
        n = self.n
        k = np.arange(1, n + 1)
        bottom = np.column_stack([k, np.zeros(n, int)])
        right = np.column_stack([np.full(n, n + 1), k])
        top = np.column_stack([k[::-1], np.full(n, n + 1)])
        left = np.column_stack([np.zeros(n, int), k[::-1]])
        return np.vstack([bottom, right, top, left])

    @cached_property
    def node_ij(self) -> np.ndarray:
        """Grid index ``(i, j)`` of every node in storage order."""
        n = self.n
        jj, ii = np.divmod(np.arange(n * n), n)
        interior = np.column_stack([ii + 1, jj + 1])
        return np.vstack([interior, self.boundary_ij])

    @cached_property
    def xy(self) -> np.ndarray:
        return self.node_ij * self.h

    @property
    def z(self) -> np.ndarray:
        return self.xy[:, 0] + 1j * self.xy[:, 1]

    @property
    def interior(self) -> slice:
        return slice(0, self.n_interior)

    @cached_property
    def boundary(self) -> BoundaryIndex:
        n, h = self.n, self.h
        ij = self.boundary_ij
        normals = np.repeat(np.array([[0, -1], [1, 0], [0, 1], [-1, 0]]), n, axis=0)
        inward = -normals
        table = self.index_map
        in1 = table[ij[:, 0] + inward[:, 0], ij[:, 1] + inward[:, 1]]
        in2 = table[ij[:, 0] + 2 * inward[:, 0], ij[:, 1] + 2 * inward[:, 1]]
        # arclength measured counterclockwise from the corner (0, 0)
        x, y = (ij * h).T
        arclength = np.concatenate([
            x[:n], 1 + y[n:2 * n], 3 - x[2 * n:3 * n], 4 - y[3 * n:]])
        return BoundaryIndex(
            xy=ij * h,
            normals=normals.astype(float),
            weights=np.full(4 * n, h),
            arclength=arclength,
            nodes=n * n + np.arange(4 * n),
            inner1=in1,
            inner2=in2,
            grid_ij=ij,
        )


def build_grid(n: int) -> tuple[GridSpec, BoundaryIndex]:
    grid = GridSpec(n)
    return grid, grid.boundary


@dataclass
class GridFunction:
    """Complex scalar field on all non-corner nodes, in storage order."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_nodes,):
            raise MetadataMismatch(
                f"grid function needs {self.grid.n_nodes} values, got {self.values.shape}")

    @classmethod
    def from_callable(cls, grid, func):
        x, y = grid.xy.T
        return cls(grid, np.broadcast_to(func(x, y), x.shape).astype(complex))

    @classmethod
    def constant(cls, grid, c=0.0):
        return cls(grid, np.full(grid.n_nodes, c, dtype=complex))

    @classmethod
    def from_array(cls, grid, arr):
        """Inverse of :meth:`as_array`; corner entries are ignored."""
        arr = np.asarray(arr)
        return cls(grid, arr[tuple(grid.node_ij.T)])

    def as_array(self, corner=np.nan) -> np.ndarray:
        """Values on the full ``(n+2, n+2)`` grid indexed ``[i, j]``."""
        n = self.grid.n
        out = np.full((n + 2, n + 2), corner, dtype=complex)
        out[tuple(self.grid.node_ij.T)] = self.values
        return out

    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior]

    def is_real(self, tol=0.0) -> bool:
        return bool(np.all(np.abs(self.values.imag) <= tol))

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _values(other, self.grid))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _values(other, self.grid))

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * _values(other, self.grid))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def conj(self):
        return GridFunction(self.grid, self.values.conj())


def _values(other, grid):
    if isinstance(other, GridFunction):
        if other.grid != grid:
            raise MetadataMismatch("grid functions live on different grids")
        return other.values
    return other


@dataclass
class BoundaryTrace:
    boundary: BoundaryIndex
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.boundary.size,):
            raise MetadataMismatch(
                f"trace needs {self.boundary.size} values, got {self.values.shape}")

    @classmethod
    def from_callable(cls, boundary, func):
        x, y = boundary.xy.T
        return cls(boundary, np.broadcast_to(func(x, y), x.shape).astype(complex))


def trace(psi: GridFunction) -> BoundaryTrace:
    b = psi.grid.boundary
    return BoundaryTrace(b, psi.values[b.nodes])


def _normal_derivative_values(values, grid):
    b = grid.boundary
    return (3 * values[b.nodes] - 4 * values[b.inner1] + values[b.inner2]) / (2 * grid.h)


def normal_derivative(psi: GridFunction) -> BoundaryTrace:
    """Outward normal derivative by the second-order one-sided stencil."""
    return BoundaryTrace(psi.grid.boundary, _normal_derivative_values(psi.values, psi.grid))


def robin_trace_values(values, grid, alpha):
    """``cos(a) psi - sin(a) dpsi/dnu`` for a stack of fields (nodes along axis 0)."""
    b = grid.boundary
    dn = (3 * values[b.nodes] - 4 * values[b.inner1] + values[b.inner2]) / (2 * grid.h)
    return np.cos(alpha) * values[b.nodes] - np.sin(alpha) * dn


def robin_trace(psi: GridFunction, alpha: float) -> BoundaryTrace:
    return BoundaryTrace(psi.grid.boundary, robin_trace_values(psi.values, psi.grid, alpha))


def volume_integral(f: GridFunction) -> complex:
    """Composite midpoint rule over interior nodes (cell area ``h**2``)."""
    return complex(f.interior_values().sum() * f.grid.h ** 2)


def boundary_integral(g: BoundaryTrace) -> complex:
    return complex(np.dot(g.values, g.boundary.weights))
