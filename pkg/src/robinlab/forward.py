"""Discrete Robin boundary-value problem for ``-Lap + v - E``.

Unknowns are all non-corner nodes in :class:`~robinlab.domain.GridSpec`
storage order.  Interior rows carry the five-point operator, boundary rows
the Robin combination ``cos(a) psi_b - sin(a) (3 psi_b - 4 psi_1 + psi_2)/(2h)``.
The interior rows do not depend on ``alpha`` and depend on ``(v, E)`` only
through ``v - E``; several identity checks rely on that.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import BoundaryTrace, GridFunction, GridSpec
from .errors import ConfigurationError, ConvergenceError, SpectralConditionError

log = logging.getLogger(__name__)

NEAR_SINGULAR_RTOL = 1e-6
SWEEP_THRESHOLD = 1e-3
SWEEP_WIDTH = 1e-6


@dataclass
class RobinProblem:
    v: GridFunction
    E: float
    alpha: float

    def __post_init__(self):
        if not self.v.is_real():
            raise ConfigurationError("potential must be real-valued")
        self.E = float(self.E)
        self.alpha = float(self.alpha)

    @property
    def grid(self) -> GridSpec:
        return self.v.grid

    def with_alpha(self, alpha):
        return RobinProblem(self.v, self.E, alpha)


@dataclass
class SolveReport:
    solution: GridFunction
    residual: float
    sigma_min: float
    near_singular: bool = field(default=False)


def assemble_operator(p: RobinProblem) -> sp.csr_matrix:
    grid = p.grid
    n, h = grid.n, grid.h
    table = grid.index_map
    ij = grid.node_ij[: grid.n_interior]
    rows = np.arange(grid.n_interior)
    diag = 4 / h**2 + (p.v.values.real[: grid.n_interior] - p.E)

    r = [rows]
    c = [rows]
    d = [diag]
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        r.append(rows)
        c.append(table[ij[:, 0] + di, ij[:, 1] + dj])
        d.append(np.full(len(rows), -1 / h**2))

    b = grid.boundary
    ca, sa = np.cos(p.alpha), np.sin(p.alpha)
    for cols, coef in ((b.nodes, ca - sa * 3 / (2 * h)),
                       (b.inner1, sa * 4 / (2 * h)),
                       (b.inner2, -sa / (2 * h))):
        r.append(b.nodes)
        c.append(cols)
        d.append(np.full(b.size, coef))

    A = sp.coo_matrix((np.concatenate(d), (np.concatenate(r), np.concatenate(c))),
                      shape=(grid.n_nodes, grid.n_nodes))
    A = A.tocsr()
    A.eliminate_zeros()
    return A


class RobinOperator:
    """Assembled and factorized system; immutable once built.

    The sparse LU factor is shared read-only by every solve, so columns of
    the boundary map or Green table can be produced from one factorization.
    """

    def __init__(self, problem: RobinProblem):
        self.problem = problem
        self.grid = problem.grid
        self.matrix = assemble_operator(problem).tocsc()
        self.norm_inf = float(abs(self.matrix).sum(axis=1).max())
        try:
            self._lu = spla.splu(self.matrix)
        except RuntimeError:
            # SuperLU reports an exactly singular factor
            self._lu = None
        self._sigma = None

    @property
    def threshold(self) -> float:
        return NEAR_SINGULAR_RTOL * self.norm_inf

    def sigma_min(self, seed=0, maxiter=500, tol=1e-10, block=4) -> float:
        if self._sigma is None:
            self._sigma = _inverse_subspace_sigma(self._lu, self.grid.n_nodes, seed,
                                                  maxiter, tol, block)
        return self._sigma

    def near_singular(self) -> bool:
        return self._lu is None or self.sigma_min() < self.threshold

    def check(self):
        if self.near_singular():
            s = 0.0 if self._lu is None else self.sigma_min()
            raise SpectralConditionError(
                f"E={self.problem.E:g} is within tolerance of the Robin spectrum at "
                f"alpha={self.problem.alpha:.6g} (sigma_min={s:.3e}, threshold={self.threshold:.3e})",
                sigma=s, threshold=self.threshold)

    def solve(self, rhs) -> np.ndarray:
        """Solve ``A x = rhs`` for one or several (complex) right-hand sides."""
        if self._lu is None:
            self.check()
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs):
            return self._lu.solve(np.ascontiguousarray(rhs.real)) + \
                1j * self._lu.solve(np.ascontiguousarray(rhs.imag))
        return self._lu.solve(np.ascontiguousarray(rhs, dtype=float))

    def solve_transpose(self, rhs) -> np.ndarray:
        """Solve ``A^T x = rhs``; rows of ``A^{-1}`` without assuming symmetry."""
        if self._lu is None:
            self.check()
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs):
            return self._lu.solve(np.ascontiguousarray(rhs.real), trans="T") + \
                1j * self._lu.solve(np.ascontiguousarray(rhs.imag), trans="T")
        return self._lu.solve(np.ascontiguousarray(rhs, dtype=float), trans="T")

    def boundary_rhs(self, data) -> np.ndarray:
        """Embed boundary data (4n,) or (4n, k) into a full right-hand side."""
        data = np.asarray(data)
        rhs = np.zeros((self.grid.n_nodes,) + data.shape[1:], dtype=data.dtype)
        rhs[self.grid.n_interior:] = data
        return rhs

    def solve_boundary(self, data) -> np.ndarray:
        return self.solve(self.boundary_rhs(data))


def _inverse_subspace_sigma(lu, size, seed, maxiter, tol, block):
    """Smallest singular value by block inverse iteration on ``A^T A``.

    Rayleigh-Ritz on a small block makes the estimate robust to the double
    eigenvalues the square's symmetry produces.
    """
    if lu is None:
        return 0.0
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((size, block)))
    theta_old = None
    for _ in range(maxiter):
        Y = lu.solve(lu.solve(Q, trans="T"))
        H = Q.T @ Y
        theta = np.linalg.eigvalsh(0.5 * (H + H.T))[-1]
        if not np.isfinite(theta):
            return 0.0
        if theta_old is not None and abs(theta - theta_old) <= tol * abs(theta):
            return float(1 / np.sqrt(theta))
        theta_old = theta
        Q, _ = np.linalg.qr(Y)
    raise ConvergenceError(f"inverse iteration for sigma_min did not converge in {maxiter} steps")


def sigma_min(p: RobinProblem, seed=0) -> float:
    return RobinOperator(p).sigma_min(seed=seed)


def robin_solve(p: RobinProblem, f: BoundaryTrace, op: RobinOperator | None = None) -> SolveReport:
    """Solve with prescribed Robin data ``[psi]_alpha = f``."""
    op = op or RobinOperator(p)
    op.check()
    rhs = op.boundary_rhs(f.values)
    x = op.solve(rhs)
    res = np.linalg.norm(op.matrix @ x - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
    return SolveReport(GridFunction(p.grid, x), float(res), op.sigma_min(), False)


@dataclass
class EigSweep:
    samples: list  # (alpha, sigma_min) for every grid angle
    flagged: list  # (alpha*, sigma_min*) refined exceptional angles
    threshold: float


def _golden_min(f, a, b, width):
    g = (np.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def eig_sweep(v: GridFunction, E: float, alpha_grid, threshold=SWEEP_THRESHOLD,
              width=SWEEP_WIDTH) -> EigSweep:
    """Scan ``sigma_min`` over angles and refine local minima.

    Angles are treated cyclically (period pi) when the grid is uniform and
    covers a full period; every discrete local minimum is refined by
    golden-section search inside its neighbour bracket and flagged when the
    refined value falls below ``threshold``.
    """
    alphas = np.asarray(sorted(alpha_grid), dtype=float)
    if alphas.size == 0:
        raise ConfigurationError("empty alpha grid")

    def s(a):
        return RobinOperator(RobinProblem(v, E, a)).sigma_min()

    sig = np.array([s(a) for a in alphas])
    m = len(alphas)
    steps = np.diff(alphas)
    cyclic = m > 2 and np.allclose(steps, steps[0]) and np.isclose(alphas[-1] + steps[0] - alphas[0], np.pi)

    flagged = []
    for k in range(m):
        if cyclic:
            lo, hi = (k - 1) % m, (k + 1) % m
            a_lo = alphas[lo] - (np.pi if k == 0 else 0.0)
            a_hi = alphas[hi] + (np.pi if k == m - 1 else 0.0)
        else:
            lo, hi = max(k - 1, 0), min(k + 1, m - 1)
            a_lo, a_hi = alphas[lo], alphas[hi]
        if m > 1 and not (sig[k] <= sig[lo] and sig[k] <= sig[hi]):
            continue
        if sig[k] == sig[lo] and lo < k and not cyclic:
            continue
        a_star, s_star = _golden_min(s, a_lo, a_hi, width) if m > 1 else (alphas[k], sig[k])
        if s_star < threshold:
            flagged.append((float(np.mod(a_star, np.pi)), float(s_star)))
            log.info("exceptional alpha %.8f (sigma_min %.2e)", a_star, s_star)
    flagged.sort()
    return EigSweep(list(zip(alphas.tolist(), sig.tolist())), flagged, threshold)
