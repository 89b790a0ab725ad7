"""Impedance (Robin-to-Robin) boundary map and its algebraic identities.

The map sends ``[psi]_alpha`` to ``[psi]_{alpha - pi/2}`` for discrete
solutions ``psi``.  It is stored as a dense matrix acting on nodal vectors;
the kernel with respect to boundary arclength is ``K[i, j] / w[j]`` with
``w`` the quadrature weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (BoundaryTrace, GridFunction, GridSpec, _normal_derivative_values,
                     robin_trace_values)
from .errors import ConfigurationError, MetadataMismatch
from .forward import RobinOperator, RobinProblem

KINDS = ("map", "difference", "kernel-with-weights")


@dataclass
class BoundaryOperator:
    matrix: np.ndarray
    alpha: float
    E: float
    n: int
    kind: str = "map"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown operator kind {self.kind!r}")
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise MetadataMismatch("boundary operator must be square")
        if self.matrix.shape[0] != 4 * self.n:
            raise MetadataMismatch(f"matrix size {self.matrix.shape[0]} does not match n={self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    def kernel(self) -> np.ndarray:
        """Kernel values ``K_ij / h`` (uniform weights ``h``)."""
        return self.matrix / self.h

    def metadata(self) -> dict:
        return {"alpha": self.alpha, "E": self.E, "n": self.n, "kind": self.kind}


def assemble_map(p: RobinProblem, op: RobinOperator | None = None) -> BoundaryOperator:
    """Column ``j`` is the rotated trace of the solution with unit data at node ``j``."""
    op = op or RobinOperator(p)
    op.check()
    grid = p.grid
    sols = op.solve_boundary(np.eye(grid.n_boundary))
    K = robin_trace_values(sols, grid, p.alpha - np.pi / 2)
    return BoundaryOperator(K, p.alpha, p.E, grid.n, "map")


def apply_map(M: BoundaryOperator, f: BoundaryTrace) -> BoundaryTrace:
    if f.values.shape[0] != M.matrix.shape[1]:
        raise MetadataMismatch(
            f"trace of length {f.values.shape[0]} cannot be mapped by a {M.matrix.shape} operator")
    return BoundaryTrace(f.boundary, M.matrix @ f.values)


def trace_identities_residual(M: BoundaryOperator, psi: GridFunction) -> tuple[float, float]:
    """Sup-norm residuals of recovering the Dirichlet and Neumann traces from ``[psi]_alpha``."""
    a = M.alpha
    grid = psi.grid
    f = robin_trace_values(psi.values, grid, a)
    Mf = M.matrix @ f
    dirichlet = psi.values[grid.boundary.nodes]
    neumann = _normal_derivative_values(psi.values, grid)
    r1 = np.sin(a) * Mf + np.cos(a) * f - dirichlet
    r2 = np.cos(a) * Mf - np.sin(a) * f - neumann
    return float(np.abs(r1).max()), float(np.abs(r2).max())


def _same_data(M1, M2, check_alpha=True):
    if M1.n != M2.n or M1.E != M2.E or (check_alpha and M1.alpha != M2.alpha):
        raise MetadataMismatch(
            f"operators disagree: {M1.metadata()} vs {M2.metadata()}")


def composition_residual(M1: BoundaryOperator, M2: BoundaryOperator) -> float:
    """Sup-entry residual of rotating ``alpha1 -> alpha2 -> alpha1``."""
    _same_data(M1, M2, check_alpha=False)
    d = M1.alpha - M2.alpha
    eye = np.eye(M1.matrix.shape[0])
    P1 = np.sin(d) * M1.matrix + np.cos(d) * eye
    P2 = np.sin(-d) * M2.matrix + np.cos(-d) * eye
    return float(np.abs(P1 @ P2 - eye).max())


def symmetry_residual(M: BoundaryOperator, corner_exclusion=0.0, relative=False) -> float:
    """max |K(x, y) - K(y, x)| of the kernel over boundary node pairs.

    Nodes within ``corner_exclusion`` of a corner are left out; the square's
    corners break smoothness of the boundary, and the one-sided stencil next
    to them is asymmetric at O(1) regardless of ``h``.  With ``relative`` the
    result is divided by max |K| over the kept pairs, which makes it
    comparable across ``alpha``: near ``alpha = 0`` the kernel is
    hypersingular and its diagonal grows like ``1/h**2``.
    """
    if M.kind != "map":
        raise ConfigurationError("symmetry residual is defined for kind='map'")
    K = M.kernel()
    if corner_exclusion > 0:
        xy = GridSpec(M.n).boundary.xy
        d = np.hypot(np.minimum(xy[:, 0], 1 - xy[:, 0]), np.minimum(xy[:, 1], 1 - xy[:, 1]))
        keep = d >= corner_exclusion
        if not keep.any():
            raise ConfigurationError("corner exclusion leaves no boundary nodes")
        K = K[np.ix_(keep, keep)]
    r = float(np.abs(K - K.T).max())
    if relative:
        scale = float(np.abs(K).max())
        return r / scale if scale > 0 else r
    return r


def operator_norm(A: BoundaryOperator | np.ndarray) -> float:
    """Induced infinity norm on nodal vectors (max absolute row sum)."""
    mat = A.matrix if isinstance(A, BoundaryOperator) else np.asarray(A)
    if mat.size == 0:
        return 0.0
    return float(np.abs(mat).sum(axis=1).max())


def difference(M1: BoundaryOperator, M2: BoundaryOperator) -> BoundaryOperator:
    _same_data(M1, M2)
    return BoundaryOperator(M1.matrix - M2.matrix, M1.alpha, M1.E, M1.n, "difference")


def delta_alpha(M1: BoundaryOperator, M2: BoundaryOperator) -> float:
    return operator_norm(difference(M1, M2))


def energy_shift_residual(v: GridFunction, E: float, alpha: float) -> float:
    """Max entry difference between the maps for ``(v, E)`` and ``(v - E, 0)``."""
    M_E = assemble_map(RobinProblem(v, E, alpha))
    M_0 = assemble_map(RobinProblem(v - E, 0.0, alpha))
    return float(np.abs(M_E.matrix - M_0.matrix).max())
