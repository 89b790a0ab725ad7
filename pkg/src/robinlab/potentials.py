"""Compactly supported smooth potentials.

Each potential is a sum of Gaussians multiplied by a C^2 cutoff that is
identically zero within ``margin`` of the boundary and identically one once
the distance exceeds ``margin + ramp``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import GridFunction, GridSpec
from .errors import ConfigurationError

FAMILIES = ("gaussian-bump", "multi-bump", "zero")


@dataclass(frozen=True)
class PotentialSpec:
    family: str = "gaussian-bump"
    centers: tuple = ((0.5, 0.5),)
    amplitudes: tuple = (1.0,)
    widths: tuple = (0.1,)
    margin: float = 0.25
    ramp: float = 0.1
    N: float | None = field(default=None)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown potential family {self.family!r}")
        if self.family == "zero":
            return
        if not (len(self.centers) == len(self.amplitudes) == len(self.widths)):
            raise ConfigurationError("centers, amplitudes and widths must have equal length")
        if self.family == "gaussian-bump" and len(self.centers) != 1:
            raise ConfigurationError("gaussian-bump takes exactly one center")
        if self.margin <= 0 or self.ramp <= 0 or self.margin + self.ramp > 0.5:
            raise ConfigurationError(
                f"need margin > 0, ramp > 0 and margin + ramp <= 0.5, got {self.margin}, {self.ramp}")
        if any(w <= 0 for w in self.widths):
            raise ConfigurationError("bump widths must be positive")

    def scaled(self, factor):
        return PotentialSpec(self.family, self.centers,
                             tuple(factor * a for a in self.amplitudes),
                             self.widths, self.margin, self.ramp, self.N)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.family == "zero":
            return np.zeros(np.broadcast(x, y).shape)
        v = np.zeros(np.broadcast(x, y).shape)
        for (cx, cy), a, s in zip(self.centers, self.amplitudes, self.widths):
            v = v + a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
        return v * cutoff(x, y, self.margin, self.ramp)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (t * (6 * t - 15) + 10)


def cutoff(x, y, margin, ramp):
    """C^2 cutoff: zero within ``margin`` of the unit square's edges, one beyond ``margin + ramp``."""
    def edge(t):
        return _smoothstep((t - margin) / ramp) * _smoothstep((1 - t - margin) / ramp)
    return edge(np.asarray(x, dtype=float)) * edge(np.asarray(y, dtype=float))


def c2_norm(spec: PotentialSpec, samples=401) -> float:
    """max(|v|, |grad v|, |Hess v|) estimated by finite differences on a fine grid."""
    t = np.linspace(0, 1, samples)
    d = t[1] - t[0]
    X, Y = np.meshgrid(t, t, indexing="ij")
    v = spec(X, Y)
    gx, gy = np.gradient(v, d, d)
    gxx, gxy = np.gradient(gx, d, d)
    _, gyy = np.gradient(gy, d, d)
    return float(max(np.abs(v).max(), np.hypot(gx, gy).max(),
                     np.abs(gxx).max(), np.abs(gxy).max(), np.abs(gyy).max()))


def make_potential(spec: PotentialSpec, grid: GridSpec) -> GridFunction:
    if spec.family != "zero" and spec.margin < 4 * grid.h:
        raise ConfigurationError(
            f"margin {spec.margin} is narrower than 4h = {4 * grid.h:.4f} on an n={grid.n} grid")
    if spec.N is not None and spec.family != "zero":
        norm = c2_norm(spec)
        if norm > spec.N:
            raise ConfigurationError(f"C2 norm {norm:.3g} exceeds declared bound N={spec.N}")
    return GridFunction.from_callable(grid, spec)


def bump(amplitude=1.0, center=(0.5, 0.5), width=0.1, margin=0.25, ramp=0.1) -> PotentialSpec:
    return PotentialSpec("gaussian-bump", (tuple(center),), (float(amplitude),), (float(width),),
                         margin, ramp)
