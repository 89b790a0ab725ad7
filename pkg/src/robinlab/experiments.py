"""Numerical experiments built from the forward, impedance and Green modules:
the boundary pairing identity for two potentials, and logarithmic-stability
sweeps over families of potential pairs.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import GridFunction, GridSpec
from .errors import ConfigurationError, SpectralConditionError
from .forward import RobinOperator, RobinProblem
from .impedance import assemble_map, delta_alpha
from .potentials import PotentialSpec, c2_norm, make_potential

log = logging.getLogger(__name__)

S_MAX = 0.75


# --- boundary pairing identity --------------------------------------------

def corner_window(grid: GridSpec) -> np.ndarray:
    """``sin(pi t)**2`` in the edge coordinate ``t``; vanishes at the corners."""
    b = grid.boundary
    t = np.where(b.normals[:, 1] != 0, b.xy[:, 0], b.xy[:, 1])
    return np.sin(np.pi * t) ** 2


def boundary_data(grid: GridSpec, seed=0, modes=5, n_random=3, window=True) -> np.ndarray:
    """Smooth test traces on the boundary circuit, one per column.

    Fourier modes ``exp(2 pi i k s / 4)`` for ``k < modes`` followed by
    ``n_random`` seeded random combinations of modes ``|k| <= 4`` with
    coefficients decaying like ``(1 + |k|)**-2``.  With ``window`` every trace
    is multiplied by :func:`corner_window`, which keeps the data smooth across
    the corners of the square.
    """
    s = grid.boundary.arclength
    cols = [np.exp(2j * np.pi * k * s / 4) for k in range(modes)]
    rng = np.random.default_rng(seed)
    ks = np.arange(-4, 5)
    for _ in range(n_random):
        c = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) / (1 + np.abs(ks)) ** 2
        cols.append(np.exp(2j * np.pi * np.outer(s, ks) / 4) @ c)
    F = np.column_stack(cols)
    if window:
        F = F * corner_window(grid)[:, None]
    return F


@dataclass
class PairResidual:
    i: int
    j: int
    lhs: complex
    rhs: complex
    relative: float


@dataclass
class AlessandriniReport:
    alpha: float
    E: float
    n: int
    pairs: list

    @property
    def max_residual(self) -> float:
        return max((p.relative for p in self.pairs), default=0.0)


def alessandrini_check(v1: GridFunction, v2: GridFunction, E: float, alpha: float,
                       data=None, pairs=None, seed=0) -> AlessandriniReport:
    """Compare ``int (v1 - v2) psi1 psi2`` with ``int [psi1]_a (M1 - M2) [psi2]_a``.

    ``data`` holds boundary traces as columns (default :func:`boundary_data`).
    ``pairs`` lists ``(i, j, conj_j)``: ``psi1`` takes column ``i``, ``psi2``
    takes column ``j``, conjugated when ``conj_j`` is true.  The default pairs
    every trace with its own conjugate, so that the volume integrand is close
    to ``(v1 - v2)|psi|**2`` and the relative residual is not dominated by
    cancellation.
    """
    grid = v1.grid
    if v2.grid != grid:
        raise ConfigurationError("potentials live on different grids")
    F = boundary_data(grid, seed) if data is None else np.asarray(data, dtype=complex)
    if F.ndim == 1:
        F = F[:, None]
    if pairs is None:
        pairs = [(k, k, True) for k in range(F.shape[1])]
    p1, p2 = RobinProblem(v1, E, alpha), RobinProblem(v2, E, alpha)
    op1, op2 = RobinOperator(p1), RobinOperator(p2)
    M1, M2 = assemble_map(p1, op1).matrix, assemble_map(p2, op2).matrix

    G1 = F
    G2 = np.column_stack([np.conj(F[:, j]) if c else F[:, j] for _, j, c in pairs])
    psi1 = op1.solve_boundary(G1)[: grid.n_interior]
    psi2 = op2.solve_boundary(G2)[: grid.n_interior]
    dv = (v1.values - v2.values)[: grid.n_interior]
    eps = np.finfo(float).eps
    out = []
    for k, (i, j, c) in enumerate(pairs):
        lhs = complex(np.sum(dv * psi1[:, i] * psi2[:, k]) * grid.h**2)
        rhs = complex(F[:, i] @ ((M1 - M2) @ G2[:, k]) * grid.h)
        out.append(PairResidual(int(i), int(j), lhs, rhs,
                                abs(lhs - rhs) / (abs(lhs) + abs(rhs) + eps)))
    return AlessandriniReport(float(alpha), float(E), grid.n, out)


# --- stability sweep -------------------------------------------------------

@dataclass
class PotentialPairFamily:
    """``v1 = base`` and ``v2 = base + eps * perturbation`` for each ``eps``."""

    base: PotentialSpec
    perturbation: PotentialSpec
    eps: tuple
    N: float | None = None

    def __post_init__(self):
        self.eps = tuple(float(e) for e in self.eps)
        if not self.eps:
            raise ConfigurationError("empty amplitude ladder")
        if any(e < 0 for e in self.eps):
            raise ConfigurationError("amplitudes must be non-negative")
        if self.N is not None:
            for e in self.eps:
                norm = c2_norm(lambda x, y, e=e: self.base(x, y) + e * self.perturbation(x, y))
                if norm > self.N:
                    raise ConfigurationError(f"member eps={e:g} has C2 norm {norm:.3g} > N={self.N}")

    def members(self, grid: GridSpec):
        v1 = make_potential(self.base, grid)
        dv = make_potential(self.perturbation, grid)
        return v1, [(e, v1 + e * dv) for e in self.eps]


@dataclass
class StabilityRecord:
    eps: float
    alpha: float
    delta_alpha: float
    sup_diff: float
    C_fit: float = float("nan")
    s_fit: float = float("nan")

    def envelope(self) -> float:
        return envelope(self.delta_alpha, self.C_fit, self.s_fit)


def envelope(delta, C, s) -> float:
    """``C (ln(3 + 1/delta))**-s``; zero when ``delta`` is zero."""
    if delta <= 0:
        return 0.0
    return float(C * np.log(3 + 1 / delta) ** (-s))


def fit_envelope(deltas, sups, s_max=S_MAX):
    """Envelope ``sup <= C (ln(3 + 1/delta))**-s`` through a set of records.

    ``s`` comes from a least-squares fit of ``log sup`` against
    ``log ln(3 + 1/delta)``, clipped to ``(0, s_max]``; ``C`` is then the
    smallest constant for which every record satisfies the bound.  Records
    with ``delta = 0`` are excluded.  Returns ``(C, s)``.
    """
    d = np.asarray(deltas, dtype=float)
    y = np.asarray(sups, dtype=float)
    ok = (d > 0) & (y > 0)
    if not ok.any():
        return float("nan"), float("nan")
    L = np.log(3 + 1 / d[ok])
    if ok.sum() >= 2 and np.ptp(np.log(L)) > 0:
        s = -np.polyfit(np.log(L), np.log(y[ok]), 1)[0]
    else:
        s = s_max
    s = float(np.clip(s, 1e-6, s_max))
    C = float(np.max(y[ok] * L**s))
    return C, s


@dataclass
class SweepResult:
    records: list
    skipped: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    monotone_violations: list = field(default_factory=list)

    def for_alpha(self, alpha):
        return [r for r in self.records if r.alpha == alpha]


def _cell(args):
    v1, member, E, alpha, M1 = args
    eps, v2 = member
    p2 = RobinProblem(v2, E, alpha)
    M2 = assemble_map(p2)
    sup = float(np.abs(v1.values - v2.values).max())
    return StabilityRecord(eps, float(alpha), delta_alpha(M1, M2), sup)


def stability_sweep(family: PotentialPairFamily, E: float, alphas, grid: GridSpec,
                    workers=1) -> SweepResult:
    """``delta_alpha`` and ``sup |v1 - v2|`` for every ``(eps, alpha)`` with envelope fits.

    Cells that violate the spectral condition are logged and skipped.
    """
    v1, members = family.members(grid)
    tasks, skipped, base_maps = [], [], {}
    for a in alphas:
        try:
            base_maps[a] = assemble_map(RobinProblem(v1, E, a))
        except SpectralConditionError as exc:
            skipped.append({"eps": None, "alpha": float(a), "reason": str(exc)})
            log.warning("skipping alpha=%.6g: %s", a, exc)
            continue
        tasks.extend((v1, m, E, a, base_maps[a]) for m in members)

    def run(t):
        try:
            return _cell(t)
        except SpectralConditionError as exc:
            return {"eps": t[1][0], "alpha": float(t[3]), "reason": str(exc)}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    records = []
    for r in results:
        if isinstance(r, dict):
            log.warning("skipping eps=%g alpha=%.6g: %s", r["eps"], r["alpha"], r["reason"])
            skipped.append(r)
        else:
            records.append(r)
    if not records:
        raise ConfigurationError("no family member satisfies the spectral condition")

    out = SweepResult(records, skipped)
    for a in sorted({r.alpha for r in records}):
        rs = sorted(out.for_alpha(a), key=lambda r: r.eps)
        C, s = fit_envelope([r.delta_alpha for r in rs], [r.sup_diff for r in rs])
        out.fits[a] = (C, s)
        for r in rs:
            r.C_fit, r.s_fit = C, s
        for lo, hi in zip(rs, rs[1:]):
            if hi.eps > lo.eps and not hi.delta_alpha > lo.delta_alpha:
                out.monotone_violations.append((a, lo.eps, hi.eps))
                log.warning("delta_alpha not increasing in eps at alpha=%.6g: eps %g -> %g",
                            a, lo.eps, hi.eps)
    return out


def min_over_alpha(records) -> dict:
    """For each ``eps``: the alpha with the smallest fitted envelope and its value.

    Ties go to the smallest alpha, so the result does not depend on the
    order of the input.
    """
    best = {}
    for r in sorted(records, key=lambda r: (r.eps, r.alpha)):
        if r.delta_alpha <= 0 or not np.isfinite(r.C_fit):
            continue
        val = r.envelope()
        if r.eps not in best or val < best[r.eps][1]:
            best[r.eps] = (r.alpha, val)
    return best
