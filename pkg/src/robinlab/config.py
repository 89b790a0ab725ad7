"""Run configuration.

INI grammar (``key = value`` under ``[section]`` headers, ``#`` comments)::

    [run]
    seed = 0                  # mandatory
    output = out              # artifact directory
    workers = 1

    [grid]
    n = 32

    [problem]
    E = -1
    alpha = pi/4              # numbers may use pi, + - * /
    alpha_grid = 0, pi/4, pi/2
    sweep_points = 64         # uniform grid in [0, pi) when alpha_grid is absent

    [potential]               # v, or v2 when two potentials are compared
    family = gaussian-bump    # gaussian-bump | multi-bump | zero
    centers = 0.5 0.5; 0.3 0.6
    amplitudes = 1
    widths = 0.1
    margin = 0.25
    ramp = 0.1
    N = 200                   # optional C2 bound

    [reference]               # v1, same keys; defaults to family = zero
    [perturbation]            # stability sweeps: v2 = v1 + eps * perturbation
    [stability]
    eps = 0.1, 0.01, 0.001

    [cgo]
    lambdas = 20, 40, 80, 160
    points = 0.5 0.5; 0.45 0.55
    formula = volume          # volume | boundary
    maxiter = 200
    tol = 1e-10
    lam_min = 0

    [forward]
    mode = 1                  # Fourier mode of the Robin data, or "random"

    [tolerances]              # thresholds used by check-identities
    trace = 1e-6

There are no environment overrides.
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import json
import math
import operator
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .potentials import PotentialSpec

DEFAULT_TOLERANCES = {
    "trace": 1e-6,          # relative to max |psi|
    "composition": 1e-8,
    "symmetry": 1e-2,       # kernel symmetry away from corners, relative to max |K|
    "corner_exclusion": 0.2,
    "kernel": 1e-8,         # kernel relation, consistent boundary sources
    "green": 5e-2,          # Green symmetry incl. boundary-interior pairs
    "resolvent": 1e-3,
    "energy": 1e-12,
}

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos,
        ast.Pow: operator.pow}


def parse_number(text: str) -> float:
    """Arithmetic on literals and ``pi``; nothing else is evaluated."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError
    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError):
        raise ConfigurationError(f"cannot read number {text!r}") from None


def parse_list(text: str) -> list:
    return [parse_number(t) for t in text.split(",") if t.strip()]


def parse_points(text: str) -> list:
    pts = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigurationError(f"point {chunk!r} needs two coordinates")
        pts.append((parse_number(parts[0]), parse_number(parts[1])))
    return pts


@dataclass
class RunConfig:
    seed: int
    n: int = 32
    E: float = -1.0
    alpha: float = 0.0
    alpha_grid: list | None = None
    sweep_points: int = 64
    potential: PotentialSpec = field(default_factory=lambda: PotentialSpec("zero"))
    reference: PotentialSpec = field(default_factory=lambda: PotentialSpec("zero"))
    perturbation: PotentialSpec | None = None
    eps: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    lambdas: list = field(default_factory=lambda: [20.0, 40.0, 80.0, 160.0])
    points: list = field(default_factory=lambda: [(0.5, 0.5)])
    formula: str = "volume"
    cgo_maxiter: int = 200
    cgo_tol: float = 1e-10
    lam_min: float = 0.0
    forward_mode: str = "1"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.n < 8:
            raise ConfigurationError(f"grid n must be at least 8, got {self.n}")
        if self.workers < 1:
            raise ConfigurationError("workers must be positive")
        if self.formula not in ("volume", "boundary"):
            raise ConfigurationError(f"unknown reconstruction formula {self.formula!r}")
        if self.sweep_points < 1:
            raise ConfigurationError("sweep_points must be positive")
        if any(l <= 0 for l in self.lambdas):
            raise ConfigurationError("lambda ladder must be positive")
        for x, y in self.points:
            if not (0 < x < 1 and 0 < y < 1):
                raise ConfigurationError(f"point ({x}, {y}) is outside the unit square")
        if self.forward_mode != "random":
            try:
                int(self.forward_mode)
            except ValueError:
                raise ConfigurationError("forward mode must be an integer or 'random'") from None

    def alphas(self) -> list:
        if self.alpha_grid:
            return list(self.alpha_grid)
        m = self.sweep_points
        return [math.pi * k / m for k in range(m)]

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("output")
        return d

    def digest(self) -> str:
        """Hash of every field that can change results (the output path is excluded)."""
        blob = json.dumps(self.canonical(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


_POTENTIAL_KEYS = {"family", "centers", "amplitudes", "widths", "margin", "ramp", "n"}


def _potential(sec, default_family="zero") -> PotentialSpec:
    if sec is None:
        return PotentialSpec(default_family)
    unknown = set(sec.keys()) - _POTENTIAL_KEYS
    if unknown:
        raise ConfigurationError(f"unknown potential keys {sorted(unknown)}")
    family = sec.get("family", default_family).strip()
    if family == "zero":
        return PotentialSpec("zero")
    centers = tuple(parse_points(sec.get("centers", "0.5 0.5")))
    amps = tuple(parse_list(sec.get("amplitudes", "1")))
    widths = tuple(parse_list(sec.get("widths", "0.1")))
    if len(amps) == 1 and len(centers) > 1:
        amps = amps * len(centers)
    if len(widths) == 1 and len(centers) > 1:
        widths = widths * len(centers)
    N = parse_number(sec["n"]) if "n" in sec else None
    return PotentialSpec(family, centers, amps, widths,
                         parse_number(sec.get("margin", "0.25")),
                         parse_number(sec.get("ramp", "0.1")), N)


_SECTIONS = {
    "run": {"seed", "output", "workers"},
    "grid": {"n"},
    "problem": {"e", "alpha", "alpha_grid", "sweep_points"},
    "stability": {"eps"},
    "cgo": {"lambdas", "points", "formula", "maxiter", "tol", "lam_min"},
    "forward": {"mode"},
    "tolerances": set(DEFAULT_TOLERANCES),
    "potential": _POTENTIAL_KEYS, "reference": _POTENTIAL_KEYS, "perturbation": _POTENTIAL_KEYS,
}


def _int(text, what):
    v = parse_number(text)
    if v != int(v):
        raise ConfigurationError(f"{what} must be an integer, got {text!r}")
    return int(v)


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigurationError(f"unknown section [{name}]")
        unknown = set(cp[name].keys()) - _SECTIONS[name]
        if unknown:
            raise ConfigurationError(f"unknown keys in [{name}]: {sorted(unknown)}")

    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    run = sec("run")
    if "seed" not in run:
        raise ConfigurationError("[run] seed is mandatory")
    kw = {"seed": _int(run["seed"], "seed")}
    if "output" in run:
        kw["output"] = run["output"].strip()
    if "workers" in run:
        kw["workers"] = _int(run["workers"], "workers")
    if "n" in sec("grid"):
        kw["n"] = _int(sec("grid")["n"], "n")
    prob = sec("problem")
    if "e" in prob:
        kw["E"] = parse_number(prob["e"])
    if "alpha" in prob:
        kw["alpha"] = parse_number(prob["alpha"])
    if "alpha_grid" in prob:
        kw["alpha_grid"] = parse_list(prob["alpha_grid"])
    if "sweep_points" in prob:
        kw["sweep_points"] = _int(prob["sweep_points"], "sweep_points")
    kw["potential"] = _potential(cp["potential"] if cp.has_section("potential") else None)
    kw["reference"] = _potential(cp["reference"] if cp.has_section("reference") else None)
    if cp.has_section("perturbation"):
        kw["perturbation"] = _potential(cp["perturbation"], "gaussian-bump")
    if "eps" in sec("stability"):
        kw["eps"] = parse_list(sec("stability")["eps"])
    cgo = sec("cgo")
    if "lambdas" in cgo:
        kw["lambdas"] = parse_list(cgo["lambdas"])
    if "points" in cgo:
        kw["points"] = parse_points(cgo["points"])
    if "formula" in cgo:
        kw["formula"] = cgo["formula"].strip()
    if "maxiter" in cgo:
        kw["cgo_maxiter"] = _int(cgo["maxiter"], "maxiter")
    if "tol" in cgo:
        kw["cgo_tol"] = parse_number(cgo["tol"])
    if "lam_min" in cgo:
        kw["lam_min"] = parse_number(cgo["lam_min"])
    if "mode" in sec("forward"):
        kw["forward_mode"] = sec("forward")["mode"].strip()
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in sec("tolerances").items():
        tol[k] = parse_number(v)
    kw["tolerances"] = tol
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} not found")
    return parse_config(path.read_text())
