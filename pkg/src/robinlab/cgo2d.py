"""Exponentially growing (quadratic-phase) solutions in the plane and
pointwise recovery of a potential from them.

Points of the square are complex numbers ``z = x + iy``.  With

    T u(z)    = -(1/pi) int u(zeta) / (zeta - z)            (d/dzbar T = id)
    Tbar u(z) = -(1/pi) int u(zeta) / conj(zeta - z)        (d/dz Tbar = id)
    F_lam(z)  = exp(lam (z - z0)**2 - conj(lam) conj(z - z0)**2)

a solution ``psi = exp(lam (z - z0)**2) mu`` of ``-Lap psi + v psi = 0``
is obtained from

    mu = 1 + 1/4 T Tbar_lam (v mu),     Tbar_lam = F_{-lam} Tbar F_lam.

Derivation: ``Lap = 4 d_z d_zbar``, so the equation becomes
``d_z(e w) = e v mu / 4`` with ``e = exp(lam (z - z0)**2)`` and
``w = d_zbar mu``.  Writing ``w = F_{-lam} g`` moves the holomorphic growth
factor into the unimodular ``F`` (the antiholomorphic part commutes with
``d_z``), giving ``d_z g = F_lam v mu / 4``, i.e. ``g = Tbar(F_lam v mu)/4``,
and ``mu = 1 + T w``.

For real ``v`` the companion solution is the complex conjugate,
``psi~(z, lam) = conj(psi(z, lam))``.  In the pairing
``psi~_1(z, -lam) psi_2(z, lam)`` the growth factors combine into
``F_lam(z)``, which is how the volume integral is evaluated.

All integrals use the midpoint rule with the singular self-cell dropped
(the kernels are odd over a centred square).  The public transforms
integrate over interior cells; the amplitude equation integrates ``T`` over
a slightly enlarged square (see ``_Lattice``).  Targets are every node of
the grid, boundary included, so that traces of ``psi`` are available.  The
discrete convolutions run through FFTs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.signal import fftconvolve

from .domain import GridFunction, GridSpec, robin_trace_values
from .errors import (AsymptoticRegimeError, ConfigurationError, MetadataMismatch,
                     RangeError, UnsupportedMode)
from .impedance import BoundaryOperator

log = logging.getLogger(__name__)

GROWTH_LIMIT = 700.0
STALL_RATIO = 0.9


@dataclass(frozen=True)
class CgoParams:
    z0: complex
    lam: complex
    maxiter: int = 200
    tol: float = 1e-10
    lam_min: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "z0", complex(self.z0))
        object.__setattr__(self, "lam", complex(self.lam))
        if self.maxiter < 1 or self.tol <= 0:
            raise ConfigurationError("need maxiter >= 1 and tol > 0")

    def with_lam(self, lam):
        return CgoParams(self.z0, lam, self.maxiter, self.tol, self.lam_min)

    def check_point(self, grid: GridSpec):
        x, y = self.z0.real, self.z0.imag
        if min(x, y, 1 - x, 1 - y) < 4 * grid.h:
            raise ConfigurationError(
                f"z0={self.z0} must lie at least 4h={4 * grid.h:.4f} inside the square")


@dataclass
class CgoSolution:
    mu: GridFunction
    converged: bool
    iterations: int
    residual: float
    params: CgoParams = field(repr=False)
    method: str = "fixed-point"


def phase_F(grid: GridSpec, z0: complex, lam: complex) -> GridFunction:
    """Unimodular phase ``exp(lam w**2 - conj(lam w**2))``, ``w = z - z0``."""
    return GridFunction(grid, _phase(grid.z, z0, lam))


def _phase(z, z0, lam):
    q = lam * (z - z0) ** 2
    # exponent is 2i Im(q); evaluating it that way keeps |F| = 1 exactly
    return np.exp(2j * q.imag)


# --- discrete singular integral operators -------------------------------

class _Kernels:
    """FFT-ready kernels on the offset lattice of one grid."""

    _cache: dict = {}

    def __init__(self, grid: GridSpec):
        m = grid.n + 1
        d = np.arange(-m, m + 1)
        di, dj = np.meshgrid(d, d, indexing="ij")
        w = (di + 1j * dj).astype(complex)
        w[m, m] = 1.0
        h = grid.h
        # convolution kernels in z - zeta; the zeta - z of the integrals flips signs
        self.cauchy = h / (np.pi * w)
        self.cauchy_conj = h / (np.pi * np.conj(w))
        self.beurling = -1.0 / (np.pi * w**2)
        for k in (self.cauchy, self.cauchy_conj, self.beurling):
            k[m, m] = 0.0
        self.center = m

    @classmethod
    def for_grid(cls, grid):
        if grid.n not in cls._cache:
            cls._cache[grid.n] = cls(grid)
        return cls._cache[grid.n]


def _to_array(values, grid):
    n = grid.n
    out = np.zeros((n + 2, n + 2), dtype=complex)
    ij = grid.node_ij[: grid.n_interior]
    out[ij[:, 0], ij[:, 1]] = values[: grid.n_interior]
    return out


def _convolve(values, grid, kernel, center):
    full = fftconvolve(_to_array(values, grid), kernel, mode="full")
    c = center
    arr = full[c:c + grid.n + 2, c:c + grid.n + 2]
    return arr[tuple(grid.node_ij.T)]


def _interior_check(u: GridFunction):
    g = u.grid
    if np.any(u.values[g.n_interior:] != 0):
        log.debug("boundary values of the density are ignored by the area integrals")


def cauchy_T(u: GridFunction) -> GridFunction:
    _interior_check(u)
    k = _Kernels.for_grid(u.grid)
    return GridFunction(u.grid, _convolve(u.values, u.grid, k.cauchy, k.center))


def _cauchy_bar_values(values, grid):
    k = _Kernels.for_grid(grid)
    return _convolve(values, grid, k.cauchy_conj, k.center)


def cauchy_Tbar(u: GridFunction, z0: complex = 0j, lam: complex = 0j) -> GridFunction:
    """Conjugate Cauchy transform twisted by the phase: ``F_{-lam} Tbar F_lam``."""
    _interior_check(u)
    grid = u.grid
    if lam == 0:
        return GridFunction(grid, _cauchy_bar_values(u.values, grid))
    F = _phase(grid.z, z0, lam)
    return GridFunction(grid, np.conj(F) * _cauchy_bar_values(F * u.values, grid))


def beurling_Pi(u: GridFunction) -> GridFunction:
    _interior_check(u)
    k = _Kernels.for_grid(u.grid)
    # the beurling kernel carries no h: h**2 area over h**2 |w|**2
    return GridFunction(u.grid, _convolve(u.values, u.grid, k.beurling, k.center))


# --- amplitude equation -------------------------------------------------

PAD = 4


class _Lattice:
    """The grid's ``(n+2)**2`` lattice extended by ``PAD`` nodes on every side.

    The amplitude equation integrates ``T`` over this enlarged square, so
    ``d_zbar mu = w`` holds on all of the closed square and ``psi`` solves the
    equation up to and including the boundary stencils.  (Any integration
    domain containing the square yields a valid amplitude; truncating at the
    interior cells would leave a kink half a cell inside the boundary.)
    """

    _cache: dict = {}

    def __init__(self, grid: GridSpec):
        self.grid = grid
        m = grid.n + 2 + 2 * PAD
        k = np.arange(m) - PAD
        ii, jj = np.meshgrid(k, k, indexing="ij")
        self.z = grid.h * (ii + 1j * jj)
        self.nodes = tuple((grid.node_ij + PAD).T)
        d = np.arange(-(m - 1), m)
        di, dj = np.meshgrid(d, d, indexing="ij")
        w = (di + 1j * dj).astype(complex)
        c = m - 1
        w[c, c] = 1.0
        self.cauchy = grid.h / (np.pi * w)
        self.cauchy_conj = grid.h / (np.pi * np.conj(w))
        self.cauchy[c, c] = self.cauchy_conj[c, c] = 0.0
        self.center = c
        self.size = m

    @classmethod
    def for_grid(cls, grid):
        if grid.n not in cls._cache:
            cls._cache[grid.n] = cls(grid)
        return cls._cache[grid.n]

    def conv(self, arr, kernel):
        c, m = self.center, self.size
        return fftconvolve(arr, kernel, mode="full")[c:c + m, c:c + m]

    def embed(self, values):
        out = np.zeros((self.size, self.size), dtype=complex)
        out[self.nodes] = values
        return out


def _mu_operator(q, grid, params):
    """``mu -> 1/4 T Tbar_lam (q mu)`` on padded-lattice arrays."""
    lat = _Lattice.for_grid(grid)
    F = _phase(lat.z, params.z0, params.lam)
    Q = lat.embed(q)

    def apply(mu):
        inner = np.conj(F) * lat.conv(F * Q * mu, lat.cauchy_conj)
        return 0.25 * lat.conv(inner, lat.cauchy)
    return lat, apply


def born_term(v: GridFunction, params: CgoParams) -> GridFunction:
    """First Born approximation ``1/4 T Tbar_lam v`` with the amplitude-equation quadrature."""
    grid = v.grid
    q = v.values.copy()
    q[grid.n_interior:] = 0.0
    lat, K = _mu_operator(q, grid, params)
    return GridFunction(grid, K(np.ones((lat.size, lat.size), dtype=complex))[lat.nodes])


def mu_solve(v: GridFunction, params: CgoParams) -> CgoSolution:
    """Solve ``mu = 1 + 1/4 T Tbar_lam (v mu)``.

    Plain fixed-point iteration from ``mu = 1``; if successive residuals stop
    shrinking by at least a factor ``STALL_RATIO`` the remaining budget goes
    to GMRES on ``(I - K) mu = 1``.  Only interior values of ``v`` enter.
    """
    grid = v.grid
    params.check_point(grid)
    if abs(params.lam) < params.lam_min:
        raise AsymptoticRegimeError(
            f"|lambda|={abs(params.lam):g} is below the configured minimum {params.lam_min:g}")
    q = v.values.copy()
    q[grid.n_interior:] = 0.0
    if not np.any(q):
        return CgoSolution(GridFunction.constant(grid, 1.0), True, 1, 0.0, params)

    lat, K = _mu_operator(q, grid, params)
    one = np.ones((lat.size, lat.size), dtype=complex)
    mu = one.copy()
    prev = None
    for it in range(1, params.maxiter + 1):
        new = one + K(mu)
        res = float(np.abs(new - mu).max())
        mu = new
        if res <= params.tol:
            return CgoSolution(GridFunction(grid, mu[lat.nodes]), True, it, res, params)
        if not np.isfinite(res):
            break
        if prev is not None and res > STALL_RATIO * prev:
            return _mu_gmres(K, lat, mu, grid, params, it)
        prev = res
    raise AsymptoticRegimeError(
        f"amplitude iteration did not converge at |lambda|={abs(params.lam):g} "
        f"within {params.maxiter} steps")


def _mu_gmres(K, lat, mu0, grid, params, used):
    log.info("fixed point stalled after %d steps at |lambda|=%g; switching to GMRES",
             used, abs(params.lam))
    shape = (lat.size, lat.size)
    N = lat.size ** 2

    def matvec(x):
        x = x.reshape(shape)
        return (x - K(x)).ravel()

    A = spla.LinearOperator((N, N), matvec=matvec, dtype=complex)
    budget = max(params.maxiter - used, 1)
    one = np.ones(N, dtype=complex)
    x, info = spla.gmres(A, one, x0=mu0.ravel(), rtol=params.tol, atol=0.0,
                         restart=min(budget, 50), maxiter=budget)
    mu = x.reshape(shape)
    res = float(np.abs(1 + K(mu) - mu).max())
    if info != 0 or not np.isfinite(res) or res > 10 * params.tol * max(1.0, np.abs(mu).max()):
        raise AsymptoticRegimeError(
            f"amplitude equation not solved at |lambda|={abs(params.lam):g} (gmres info={info})")
    return CgoSolution(GridFunction(grid, mu[lat.nodes]), True, used + budget, res, params, "gmres")


def growth_factor(grid: GridSpec, params: CgoParams) -> np.ndarray:
    w2 = (grid.z - params.z0) ** 2
    if abs(params.lam) * np.abs(w2).max() > GROWTH_LIMIT:
        raise RangeError(
            f"|lambda| max|z - z0|^2 = {abs(params.lam) * np.abs(w2).max():.1f} exceeds {GROWTH_LIMIT}")
    return np.exp(params.lam * w2)


def psi_from_mu(sol: CgoSolution, params: CgoParams | None = None) -> GridFunction:
    params = params or sol.params
    grid = sol.mu.grid
    return GridFunction(grid, growth_factor(grid, params) * sol.mu.values)


def psi_tilde(sol: CgoSolution, params: CgoParams | None = None, v: GridFunction | None = None):
    """Companion solution for a real potential: the complex conjugate of ``psi``."""
    if v is not None and not v.is_real():
        raise UnsupportedMode("the conjugate companion solution needs a real potential")
    return psi_from_mu(sol, params).conj()


# --- boundary pairing and reconstruction --------------------------------

def _require_real(*vs):
    for v in vs:
        if not v.is_real():
            raise UnsupportedMode("complex potentials are not supported")


def delta_h_volume(v1: GridFunction, v2: GridFunction, params: CgoParams,
                   sol1: CgoSolution | None = None, sol2: CgoSolution | None = None) -> complex:
    """``int psi~_1(z, -lam) (v2 - v1) psi_2(z, lam) dA`` with the phases combined."""
    if v1.grid != v2.grid:
        raise MetadataMismatch("potentials live on different grids")
    _require_real(v1, v2)
    grid = v1.grid
    dv = (v2.values - v1.values)[: grid.n_interior]
    if not np.any(dv):
        return 0j
    sol1 = sol1 or mu_solve(v1, params.with_lam(-params.lam))
    sol2 = sol2 or mu_solve(v2, params)
    F = _phase(grid.z, params.z0, params.lam)[: grid.n_interior]
    mu1 = sol1.mu.values[: grid.n_interior]
    mu2 = sol2.mu.values[: grid.n_interior]
    return complex(np.sum(F * np.conj(mu1) * dv * mu2) * grid.h**2)


def cgo_traces(v1: GridFunction, v2: GridFunction, params: CgoParams, alpha: float,
               E: float = 0.0):
    """``([psi~_1(., -lam)]_alpha, [psi_2(., lam)]_alpha)`` on the boundary circuit.

    At nonzero energy the amplitudes are built for ``v_j - E``.
    """
    _require_real(v1, v2)
    grid = v1.grid
    q1, q2 = v1 - E, v2 - E
    s1 = mu_solve(q1, params.with_lam(-params.lam))
    s2 = mu_solve(q2, params)
    t1 = robin_trace_values(psi_tilde(s1).values, grid, alpha)
    t2 = robin_trace_values(psi_from_mu(s2).values, grid, alpha)
    return t1, t2


def delta_h_boundary(M1: BoundaryOperator, M2: BoundaryOperator, traces) -> complex:
    """``int [psi~_1]_a (M2 - M1) [psi_2]_a ds`` on the boundary circuit.

    The pairing carries no extra normalisation, so it equals the volume
    integral exactly in the continuum.
    """
    if M1.n != M2.n or M1.alpha != M2.alpha or M1.E != M2.E:
        raise MetadataMismatch(f"maps disagree: {M1.metadata()} vs {M2.metadata()}")
    t1, t2 = (np.asarray(t, dtype=complex) for t in traces)
    if t1.shape != (4 * M1.n,) or t2.shape != (4 * M1.n,):
        raise MetadataMismatch("traces do not match the boundary operator size")
    return complex(t1 @ ((M2.matrix - M1.matrix) @ t2) * M1.h)


def reconstruct_estimate(dh: complex, lam: complex) -> complex:
    """``(2/pi)|lam| dh``; its imaginary part vanishes in the limit for real potentials."""
    return 2.0 / np.pi * abs(lam) * complex(dh)


def reconstruct_point(dh: complex, lam: complex) -> float:
    est = reconstruct_estimate(dh, lam)
    if est.imag != 0:
        log.debug("reconstruction imaginary part %.3e at |lambda|=%g", est.imag, abs(lam))
    return float(est.real)


@dataclass
class RateRecord:
    z0: complex
    lam: float
    v_true_diff: float
    v_est: float
    imag: float
    err: float


@dataclass
class RateTable:
    records: list
    fit_p: float

    def max_err(self):
        """``[(lambda, max error over points)]`` in ladder order."""
        lams = sorted({r.lam for r in self.records})
        return [(lam, max(r.err for r in self.records if r.lam == lam)) for lam in lams]


def fit_rate(lams, errs) -> float:
    """Least-squares ``p`` in ``err ~ c lam**(-p) (ln lam)**2``."""
    lams = np.asarray(lams, dtype=float)
    errs = np.asarray(errs, dtype=float)
    ok = errs > 0
    if ok.sum() < 2:
        return float("inf")
    y = np.log(errs[ok] / np.log(lams[ok]) ** 2)
    slope = np.polyfit(np.log(lams[ok]), y, 1)[0]
    return float(-slope)


def rate_check(points, lams, v1: GridFunction, v2: GridFunction, exact=None,
               maxiter=200, tol=1e-10) -> RateTable:
    """Reconstruction error ``|dv(z0) - (2/pi)|lam| dh|`` over points and a lambda ladder.

    ``exact(x, y)`` gives the true difference ``v2 - v1``; without it the grid
    difference is interpolated bilinearly.  ``fit_p`` is fitted to the worst
    error over points at each ``lam``.
    """
    lams = [float(abs(lam)) for lam in lams]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ConfigurationError("lambda ladder must be strictly increasing")
    grid = v1.grid
    records = []
    for z0 in points:
        z0 = complex(z0)
        if exact is not None:
            true = float(np.real(exact(z0.real, z0.imag)))
        else:
            true = _interpolate(v2 - v1, z0).real
        for lam in lams:
            params = CgoParams(z0, lam, maxiter, tol)
            est = reconstruct_estimate(delta_h_volume(v1, v2, params), lam)
            records.append(RateRecord(z0, lam, true, est.real, est.imag, abs(true - est.real)))
    table = RateTable(records, float("nan"))
    lam_err = table.max_err()
    table.fit_p = fit_rate([a for a, _ in lam_err], [e for _, e in lam_err])
    log.info("rate fit p=%.3f on grid n=%d", table.fit_p, grid.n)
    return table


def _interpolate(f: GridFunction, z0: complex) -> complex:
    """Bilinear interpolation of a grid function at ``z0``."""
    grid = f.grid
    arr = f.as_array(corner=0.0)
    s, t = z0.real / grid.h, z0.imag / grid.h
    i, j = int(np.floor(s)), int(np.floor(t))
    i, j = min(max(i, 0), grid.n), min(max(j, 0), grid.n)
    a, b = s - i, t - j
    return complex((1 - a) * (1 - b) * arr[i, j] + a * (1 - b) * arr[i + 1, j]
                   + (1 - a) * b * arr[i, j + 1] + a * b * arr[i + 1, j + 1])
