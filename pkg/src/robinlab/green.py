"""Robin Green function of ``Lap - v + E`` and the identities it satisfies.

Interior sources carry the discrete delta ``1/h**2`` on their node, so each
column solves ``A G = -delta`` (``A`` discretizes ``-Lap + v - E``) with
homogeneous Robin rows.

Boundary sources are defined through Green's representation formula: a
solution with Robin data ``f`` is ``psi(x) = (1/sin a) int G(x, y) f(y) ds``,
so the column for a boundary node ``y`` is ``sin(a)`` times the solution whose
Robin data is the boundary delta ``1/h`` at ``y``.  This is the assembly
under which the boundary kernel relation holds node by node.  An independent
construction, :func:`boundary_limit_columns`, approaches the boundary from
interior sources instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import GridFunction, GridSpec
from .errors import ConfigurationError, HypothesisViolation, MetadataMismatch
from .forward import RobinOperator, RobinProblem
from .impedance import BoundaryOperator

SIN_TOL = 1e-12


@dataclass
class GreenColumns:
    """Columns ``G(., y)`` for a list of source nodes (storage indices)."""

    matrix: np.ndarray = field(repr=False)
    sources: np.ndarray
    problem: RobinProblem = field(repr=False)
    mode: str = "delta"

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=np.int64)
        if self.matrix.shape != (self.grid.n_nodes, len(self.sources)):
            raise MetadataMismatch("column matrix does not match grid and source list")
        self._pos = {int(s): k for k, s in enumerate(self.sources)}

    @property
    def grid(self) -> GridSpec:
        return self.problem.grid

    @property
    def alpha(self) -> float:
        return self.problem.alpha

    @property
    def E(self) -> float:
        return self.problem.E

    def column(self, source) -> GridFunction:
        return GridFunction(self.grid, self.matrix[:, self._pos[int(source)]])

    def value(self, x, y) -> complex:
        """``G(x, y)`` for a node ``x`` and a stored source ``y``."""
        return complex(self.matrix[int(x), self._pos[int(y)]])

    def has_source(self, y) -> bool:
        return int(y) in self._pos


def _check_sources(grid, sources):
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if sources.ndim != 1:
        raise ConfigurationError("sources must be a flat list of node indices")
    if np.any(sources < 0) or np.any(sources >= grid.n_nodes):
        raise ConfigurationError("source index outside the grid")
    if len(np.unique(sources)) != len(sources):
        raise ConfigurationError("duplicate source nodes")
    return sources


def green_columns(p: RobinProblem, sources, op: RobinOperator | None = None) -> GreenColumns:
    grid = p.grid
    sources = _check_sources(grid, sources)
    op = op or RobinOperator(p)
    op.check()
    h = grid.h
    on_boundary = sources >= grid.n_interior
    if np.any(on_boundary) and abs(np.sin(p.alpha)) < SIN_TOL:
        raise HypothesisViolation("boundary sources need sin(alpha) != 0")
    rhs = np.zeros((grid.n_nodes, len(sources)))
    cols = np.arange(len(sources))
    rhs[sources, cols] = np.where(on_boundary, np.sin(p.alpha) / h, -1.0 / h**2)
    return GreenColumns(op.solve(rhs), sources, p, "delta")


def green_rows(p: RobinProblem, targets, op: RobinOperator | None = None) -> np.ndarray:
    """``G(x, .)`` for interior targets ``x``, from transposed solves.

    Returns an ``(n_nodes, len(targets))`` array whose column ``k`` holds
    ``G(targets[k], xi)`` as a function of the source node ``xi``.
    """
    grid = p.grid
    targets = _check_sources(grid, targets)
    if np.any(targets >= grid.n_interior):
        raise ConfigurationError("row evaluation is defined for interior targets")
    op = op or RobinOperator(p)
    op.check()
    e = np.zeros((grid.n_nodes, len(targets)))
    e[targets, np.arange(len(targets))] = 1.0
    return -op.solve_transpose(e) / grid.h**2


def boundary_limit_columns(p: RobinProblem, boundary_nodes, op: RobinOperator | None = None,
                           depths=(3, 4)) -> GreenColumns:
    """Boundary-source columns extrapolated from interior sources.

    Sources at depths ``d3*h`` and ``d4*h`` along the inward normal are fitted
    by ``q(t) = G_b (1 - cot(a) t) + c t**2``, the quadratic that obeys the
    source-side Robin condition at ``t = 0``; ``G_b`` is the boundary value.
    """
    grid = p.grid
    b = grid.boundary
    nodes = _check_sources(grid, boundary_nodes)
    if np.any(nodes < grid.n_interior):
        raise ConfigurationError("boundary_limit_columns takes boundary nodes")
    s = np.sin(p.alpha)
    if abs(s) < SIN_TOL:
        raise HypothesisViolation("boundary sources need sin(alpha) != 0")
    cot = np.cos(p.alpha) / s
    t3, t4 = depths[0] * grid.h, depths[1] * grid.h
    det = (1 - cot * t3) * t4**2 - (1 - cot * t4) * t3**2
    if abs(det) < 1e-8 * t4**2:
        raise HypothesisViolation("extrapolation is degenerate for this alpha and grid")

    k = nodes - grid.n_interior
    inward = -b.normals[k].astype(int)
    ij = b.grid_ij[k]
    table = grid.index_map
    deep3 = table[ij[:, 0] + depths[0] * inward[:, 0], ij[:, 1] + depths[0] * inward[:, 1]]
    deep4 = table[ij[:, 0] + depths[1] * inward[:, 0], ij[:, 1] + depths[1] * inward[:, 1]]
    if np.any(deep3 < 0) or np.any(deep4 < 0) or np.any(deep4 >= grid.n_interior):
        raise ConfigurationError("grid too small for the extrapolation depths")

    # near corners a deep node can serve two edges
    deep, back = np.unique(np.concatenate([deep3, deep4]), return_inverse=True)
    G = green_columns(p, deep, op).matrix[:, back]
    m = len(nodes)
    G3, G4 = G[:, :m], G[:, m:]
    return GreenColumns((G3 * t4**2 - G4 * t3**2) / det, nodes, p, "boundary-limit")


def corner_distance(xy) -> np.ndarray:
    """Distance from each point to the nearest corner of the unit square."""
    xy = np.asarray(xy, dtype=float)
    dx = np.minimum(xy[..., 0], 1 - xy[..., 0])
    dy = np.minimum(xy[..., 1], 1 - xy[..., 1])
    return np.hypot(dx, dy)


def green_symmetry_residual(G: GreenColumns) -> float:
    """max |G(x, y) - G(y, x)| over ordered pairs of stored sources."""
    S = G.matrix[G.sources, :]
    return float(np.abs(S - S.T).max()) if S.size else 0.0


def kernel_relation_residual(M: BoundaryOperator, G: GreenColumns, alpha: float,
                             corner_exclusion=0.0, min_separation=0.0) -> float:
    """Sup residual of ``K/h - (G/sin^2 a - cot a * delta/h)`` on boundary pairs.

    Rows ``x_i`` run over all boundary nodes, columns over the boundary
    sources stored in ``G``.  Nodes closer than ``corner_exclusion`` to a
    corner and pairs closer than ``min_separation`` are skipped.
    """
    s = np.sin(alpha)
    if abs(s) < SIN_TOL:
        raise HypothesisViolation("the kernel relation requires sin(alpha) != 0")
    if M.alpha != alpha or G.alpha != alpha or M.E != G.E or M.n != G.grid.n:
        raise MetadataMismatch("map and Green columns disagree on alpha, E or n")
    grid = G.grid
    b = grid.boundary
    cols = G.sources - grid.n_interior
    if np.any(cols < 0):
        raise ConfigurationError("kernel relation needs boundary sources")
    h = grid.h
    delta = (np.arange(b.size)[:, None] == cols[None, :]) / h
    Gb = G.matrix[b.nodes][:, np.arange(len(cols))]
    R = M.kernel()[:, cols] - (Gb / s**2 - np.cos(alpha) / s * delta)

    keep = np.ones(R.shape, bool)
    if corner_exclusion > 0:
        far = corner_distance(b.xy) >= corner_exclusion
        keep &= far[:, None] & far[cols][None, :]
    if min_separation > 0:
        d = np.linalg.norm(b.xy[:, None, :] - b.xy[cols][None, :, :], axis=-1)
        keep &= d >= min_separation
    if not keep.any():
        raise ConfigurationError("exclusions leave no boundary pairs to compare")
    return float(np.abs(R[keep]).max())


def resolvent_difference_residual(G1: GreenColumns, G2: GreenColumns, pairs) -> float:
    """Residual of ``G1 - G2 = int (v1 - v2) G1 G2`` on sampled node pairs.

    ``pairs`` lists ``(x, y)`` interior nodes; ``y`` must be a stored source
    of ``G2`` and of ``G1``.  ``G1(x, xi)`` is taken from a transposed solve,
    so no symmetry of the discrete Green function is assumed.
    """
    p1, p2 = G1.problem, G2.problem
    if p1.alpha != p2.alpha or p1.E != p2.E or p1.grid != p2.grid:
        raise MetadataMismatch("Green columns disagree on alpha, E or grid")
    grid = p1.grid
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    xs = np.unique(pairs[:, 0])
    rows = green_rows(p1, xs)
    row_of = {int(x): k for k, x in enumerate(xs)}
    dv = (p1.v.values - p2.v.values).real[: grid.n_interior]
    worst = 0.0
    for x, y in pairs:
        g1_row = rows[: grid.n_interior, row_of[int(x)]]
        g2_col = G2.matrix[: grid.n_interior, G2._pos[int(y)]]
        vol = np.sum(dv * g1_row * g2_col) * grid.h**2
        r = G1.value(x, y) - G2.value(x, y) - vol
        worst = max(worst, abs(r))
    return float(worst)


def nearest_nodes(grid: GridSpec, points, boundary=False) -> np.ndarray:
    """Storage indices of the nodes nearest to physical points.

    With ``boundary=True`` the search is restricted to boundary nodes,
    otherwise to interior nodes.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if boundary:
        cand = grid.boundary.xy
        offset = grid.n_interior
    else:
        cand = grid.xy[: grid.n_interior]
        offset = 0
    d = np.linalg.norm(cand[None, :, :] - pts[:, None, :], axis=-1)
    return offset + d.argmin(axis=1)
