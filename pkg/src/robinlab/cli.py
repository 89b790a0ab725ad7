"""Command-line entry point: ``robinlab <command> <config.ini> [--output DIR]``.

Exit codes: 0 success, 2 invalid input, 3 spectral condition violated,
4 an iteration did not converge.
"""

from __future__ import annotations

import argparse
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cgo2d import (CgoParams, cgo_traces, delta_h_boundary, delta_h_volume, fit_rate,
                    reconstruct_estimate)
from .config import RunConfig, load_config
from .domain import BoundaryTrace, GridSpec, robin_trace
from .errors import ConfigurationError, ConvergenceError, SpectralConditionError
from .experiments import (PotentialPairFamily, alessandrini_check, boundary_data,
                          min_over_alpha, stability_sweep)
from .forward import RobinOperator, RobinProblem, eig_sweep, robin_solve
from .green import (green_columns, green_symmetry_residual, kernel_relation_residual,
                    nearest_nodes, resolvent_difference_residual)
from .impedance import (assemble_map, composition_residual, energy_shift_residual,
                        operator_norm, symmetry_residual, trace_identities_residual)
from .io import (write_boundary_operator, write_boundary_trace, write_grid_function,
                 write_json, write_rows)
from .potentials import bump, make_potential

log = logging.getLogger("robinlab")

COMMANDS = ("forward", "map", "check-identities", "eig-sweep", "alessandrini",
            "reconstruct", "stability")
EXIT_OK, EXIT_INPUT, EXIT_SPECTRAL, EXIT_CONVERGENCE = 0, 2, 3, 4


def _problem(cfg: RunConfig, grid, alpha=None):
    v = make_potential(cfg.potential, grid)
    return RobinProblem(v, cfg.E, cfg.alpha if alpha is None else alpha)


def cmd_forward(cfg, grid, out):
    p = _problem(cfg, grid)
    data = boundary_data(grid, cfg.seed, modes=max(int(cfg.forward_mode) + 1, 1)
                         if cfg.forward_mode != "random" else 1, n_random=1, window=False)
    f = data[:, -1] if cfg.forward_mode == "random" else data[:, int(cfg.forward_mode)]
    rep = robin_solve(p, BoundaryTrace(grid.boundary, f))
    write_grid_function(out / "solution.csv", rep.solution)
    write_boundary_trace(out / "data.csv", BoundaryTrace(grid.boundary, f))
    write_boundary_trace(out / "rotated_trace.csv", robin_trace(rep.solution, p.alpha - math.pi / 2))
    write_json(out / "forward.json", {"residual": rep.residual, "sigma_min": rep.sigma_min})
    return {"residual": rep.residual, "sigma_min": rep.sigma_min}


def cmd_map(cfg, grid, out):
    M = assemble_map(_problem(cfg, grid))
    write_boundary_operator(out / "map.csv", M)
    return {"operator_norm": operator_norm(M)}


def _perturbed(cfg, grid, v):
    margin = min(0.4, max(0.25, 4 * grid.h))
    return v + make_potential(bump(0.1, (0.5, 0.5), 0.1, margin, 0.1), grid)


def _boundary_points(rng, k):
    """``k`` random points on the square's edges, at least 0.15 from the corners."""
    t = rng.uniform(0.15, 0.85, k)
    edge = rng.integers(0, 4, k)
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    steps = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    return corners[edge] + t[:, None] * steps[edge]


def identity_suites(cfg: RunConfig, grid: GridSpec) -> list:
    """``(suite, value, threshold)`` for every identity at the configured problem."""
    tol = cfg.tolerances
    rng = np.random.default_rng(cfg.seed)
    p = _problem(cfg, grid)
    op = RobinOperator(p)
    M = assemble_map(p, op)
    rows = []

    worst = 0.0
    for k in range(5):
        f = rng.standard_normal(grid.n_boundary) + 1j * rng.standard_normal(grid.n_boundary)
        psi = robin_solve(p, BoundaryTrace(grid.boundary, f), op).solution
        r1, r2 = trace_identities_residual(M, psi)
        worst = max(worst, max(r1, r2) / np.abs(psi.values).max())
    rows.append(("trace", worst, tol["trace"]))

    alpha2 = p.alpha + math.pi / 2
    p2 = p.with_alpha(alpha2)
    op2 = RobinOperator(p2)
    M2 = assemble_map(p2, op2)
    rows.append(("composition", composition_residual(M, M2), tol["composition"]))
    rows.append(("symmetry", symmetry_residual(M, tol["corner_exclusion"], relative=True), tol["symmetry"]))

    bsrc = grid.n_interior + np.arange(grid.n_boundary)
    kern = [kernel_relation_residual(MM, green_columns(pp, bsrc, oo), pp.alpha)
            for pp, oo, MM in ((p, op, M), (p2, op2, M2)) if abs(math.sin(pp.alpha)) > 1e-12]
    rows.append(("kernel", max(kern), tol["kernel"]))

    pts = rng.uniform(0.15, 0.85, size=(5, 2))
    inner = np.unique(nearest_nodes(grid, pts))
    src = inner
    if abs(math.sin(p.alpha)) > 1e-12:
        bpts = _boundary_points(rng, 5)
        src = np.unique(np.concatenate([inner, nearest_nodes(grid, bpts, boundary=True)]))
    rows.append(("green", green_symmetry_residual(green_columns(p, src, op)), tol["green"]))

    q = RobinProblem(_perturbed(cfg, grid, p.v), p.E, p.alpha)
    G1, G2 = green_columns(p, inner, op), green_columns(q, inner)
    pairs = [(x, y) for x in inner for y in inner]
    rows.append(("resolvent", resolvent_difference_residual(G1, G2, pairs), tol["resolvent"]))
    rows.append(("energy", energy_shift_residual(p.v, p.E, p.alpha), tol["energy"]))
    return rows


def cmd_check_identities(cfg, grid, out):
    rows = identity_suites(cfg, grid)
    table = [(name, value, thr, value <= thr) for name, value, thr in rows]
    write_rows(out / "identities.csv", ["suite", "value", "threshold", "pass"], table)
    failed = [name for name, _, _, ok in table if not ok]
    for name in failed:
        log.warning("identity suite %s above threshold", name)
    return {"failed": failed}


def cmd_eig_sweep(cfg, grid, out):
    v = make_potential(cfg.potential, grid)
    sw = eig_sweep(v, cfg.E, cfg.alphas())
    write_rows(out / "eig_sweep.csv", ["alpha", "sigma_min"], sw.samples)
    write_rows(out / "flagged.csv", ["alpha", "sigma_min"], sw.flagged)
    return {"flagged": len(sw.flagged)}


def cmd_alessandrini(cfg, grid, out):
    v1 = make_potential(cfg.reference, grid)
    v2 = make_potential(cfg.potential, grid)
    alphas = cfg.alpha_grid or [cfg.alpha]
    rows, worst = [], 0.0
    for a in alphas:
        rep = alessandrini_check(v1, v2, cfg.E, a, seed=cfg.seed)
        worst = max(worst, rep.max_residual)
        rows.extend((a, r.i, r.j, r.lhs.real, r.lhs.imag, r.rhs.real, r.rhs.imag, r.relative)
                    for r in rep.pairs)
    write_rows(out / "alessandrini.csv",
               ["alpha", "i", "j", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "relative"], rows)
    return {"max_relative_residual": worst}


def cmd_reconstruct(cfg, grid, out):
    v1 = make_potential(cfg.reference, grid)
    v2 = make_potential(cfg.potential, grid)
    if cfg.formula == "boundary":
        maps = [assemble_map(RobinProblem(v, cfg.E, cfg.alpha)) for v in (v1, v2)]
    rows, by_lam = [], {}
    for x, y in cfg.points:
        true = float(cfg.potential(x, y) - cfg.reference(x, y))
        for lam in cfg.lambdas:
            params = CgoParams(complex(x, y), lam, cfg.cgo_maxiter, cfg.cgo_tol, cfg.lam_min)
            if cfg.formula == "volume":
                dh = delta_h_volume(v1, v2, params)
            else:
                dh = delta_h_boundary(maps[0], maps[1],
                                      cgo_traces(v1, v2, params, cfg.alpha, cfg.E))
            est = reconstruct_estimate(dh, lam).real
            err = abs(true - est)
            rows.append((x, y, true, est, err, lam))
            by_lam[lam] = max(by_lam.get(lam, 0.0), err)
    write_rows(out / "reconstruction.csv", ["x", "y", "v_true_diff", "v_est", "err", "lambda"], rows)
    lams = sorted(by_lam)
    p = fit_rate(lams, [by_lam[l] for l in lams]) if len(lams) > 1 else float("nan")
    write_rows(out / "rates.csv", ["lambda", "max_err", "fit_p"], [(l, by_lam[l], p) for l in lams])
    return {"fit_p": p}


def cmd_stability(cfg, grid, out):
    if cfg.perturbation is None:
        raise ConfigurationError("stability needs a [perturbation] section")
    fam = PotentialPairFamily(cfg.potential, cfg.perturbation, tuple(cfg.eps), cfg.potential.N)
    res = stability_sweep(fam, cfg.E, cfg.alpha_grid or [cfg.alpha], grid, cfg.workers)
    recs = sorted(res.records, key=lambda r: (r.alpha, r.eps))
    write_rows(out / "sweep.csv", ["eps", "alpha", "delta_alpha", "sup_diff", "C_fit", "s_fit"],
               [(r.eps, r.alpha, r.delta_alpha, r.sup_diff, r.C_fit, r.s_fit) for r in recs])
    best = min_over_alpha(res.records)
    report = {
        "skipped": res.skipped,
        "fits": [{"alpha": a, "C": C, "s": s} for a, (C, s) in sorted(res.fits.items())],
        "min_over_alpha": [{"eps": e, "alpha": a, "envelope": v} for e, (a, v) in sorted(best.items())],
        "monotone_violations": [list(v) for v in res.monotone_violations],
    }
    write_json(out / "report.json", report)
    return {"records": len(recs), "skipped": len(res.skipped)}


HANDLERS = {
    "forward": cmd_forward, "map": cmd_map, "check-identities": cmd_check_identities,
    "eig-sweep": cmd_eig_sweep, "alessandrini": cmd_alessandrini,
    "reconstruct": cmd_reconstruct, "stability": cmd_stability,
}


def dispatch(command: str, cfg: RunConfig, output=None) -> dict:
    out = Path(output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    grid = GridSpec(cfg.n)
    t0 = time.perf_counter()
    summary = HANDLERS[command](cfg, grid, out)
    manifest = {
        "command": command,
        "config_hash": cfg.digest(),
        "versions": {"robinlab": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "wall_time": time.perf_counter() - t0,
        "summary": summary,
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="robinlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="INI configuration file")
    ap.add_argument("--output", help="artifact directory (overrides [run] output)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        dispatch(args.command, cfg, args.output)
    except SpectralConditionError as exc:
        print(f"robinlab: spectral condition violated: {exc}", file=sys.stderr)
        return EXIT_SPECTRAL
    except ConvergenceError as exc:
        print(f"robinlab: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigurationError, ValueError) as exc:
        print(f"robinlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
