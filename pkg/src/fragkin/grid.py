"""Logarithmic size grids, number densities on them, and their Mellin moments."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "SizeGrid",
    "DensityState",
    "Observables",
    "NarrowBump",
    "GammaLike",
    "Table",
    "make_log_grid",
    "init_density",
    "mellin_numeric",
    "observables",
    "S_MIN",
    "S_MAX",
]

S_MIN, S_MAX = 0.5, 8.0


@dataclass(frozen=True)
class SizeGrid:
    """Geometrically spaced size nodes from ``r_min`` to ``r_max`` (inclusive)."""

    r_min: float
    r_max: float
    n: int

    @cached_property
    def r(self) -> np.ndarray:
        nodes = np.geomspace(self.r_min, self.r_max, self.n)
        nodes[0], nodes[-1] = self.r_min, self.r_max
        nodes.flags.writeable = False
        return nodes

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights over the whole grid."""
        dr = np.diff(self.r)
        w = np.zeros(self.n)
        w[:-1] += 0.5 * dr
        w[1:] += 0.5 * dr
        w.flags.writeable = False
        return w

    @property
    def ratio(self) -> float:
        return (self.r_max / self.r_min) ** (1.0 / (self.n - 1))

    def matches(self, r: np.ndarray, rtol: float = 1e-9) -> bool:
        return r.shape == self.r.shape and np.allclose(r, self.r, rtol=rtol, atol=0.0)


def make_log_grid(r_min: float, r_max: float, n: int) -> SizeGrid:
    r_min, r_max = float(r_min), float(r_max)
    if int(n) != n or n < 8:
        raise ConfigError(f"grid needs an integer node count >= 8, got {n!r}")
    if not (np.isfinite(r_min) and np.isfinite(r_max)) or r_min <= 0.0 or r_max <= r_min:
        raise ConfigError(f"grid bounds must satisfy 0 < r_min < r_max, got ({r_min}, {r_max})")
    return SizeGrid(r_min, r_max, int(n))


@dataclass
class DensityState:
    """Number density values ``n(r_i, t)`` on a size grid."""

    grid: SizeGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"density has shape {self.values.shape}, grid has {self.grid.n} nodes"
            )

    def scaled(self, factor: float) -> "DensityState":
        return replace(self, values=self.values * factor)


@dataclass(frozen=True)
class Observables:
    """Physical moments: N = M(1), lam = M(2)/M(1), S = M(3), V = M(4)."""

    t: float
    N: float
    lam: float
    S: float
    V: float

    @property
    def M2(self) -> float:
        return self.N * self.lam


# --- initial conditions ---------------------------------------------------


@dataclass(frozen=True)
class NarrowBump:
    """Log-normal bump around ``r0``; ``w`` is the standard deviation of ln r.

    Stands in for a monodisperse sample, which a grid cannot represent exactly.
    """

    r0: float = 1.0
    w: float = 0.02


@dataclass(frozen=True)
class GammaLike:
    """Shape ``r**alpha * exp(-(alpha + 1) r)``, the limit law at unit mean size."""

    alpha: float = 1.0


@dataclass(frozen=True)
class Table:
    """Piecewise-linear density through ``(r, n)`` pairs, zero outside their span."""

    points: Sequence[tuple] = field(default_factory=tuple)


InitialConditionSpec = Union[NarrowBump, GammaLike, Table]


def _shape(spec: InitialConditionSpec, grid: SizeGrid) -> np.ndarray:
    r = grid.r
    if isinstance(spec, NarrowBump):
        lo, hi = 10.0 * grid.r_min, grid.r_max / 10.0
        if not (lo * (1 - 1e-12) <= spec.r0 <= hi * (1 + 1e-12)):
            raise ConfigError(f"bump centre r0={spec.r0} must lie in [{lo:g}, {hi:g}]")
        if not spec.w > 0.0:
            raise ConfigError(f"bump width must be > 0, got {spec.w}")
        z = np.log(r / spec.r0) / spec.w
        return np.exp(-0.5 * z * z)
    if isinstance(spec, GammaLike):
        if not spec.alpha >= 0.0:
            raise ConfigError(f"gamma-like shape needs alpha >= 0, got {spec.alpha}")
        return np.exp(spec.alpha * np.log(r) - (spec.alpha + 1.0) * r)
    if isinstance(spec, Table):
        pts = np.asarray(spec.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
            raise ConfigError("table initial condition needs a list of (r, n) pairs")
        if np.any(np.diff(pts[:, 0]) <= 0) or np.any(pts[:, 1] < 0):
            raise ConfigError("table points need increasing r and n >= 0")
        return np.interp(r, pts[:, 0], pts[:, 1], left=0.0, right=0.0)
    raise ConfigError(f"unknown initial condition {spec!r}")


def init_density(spec: InitialConditionSpec, grid: SizeGrid, V_target: float) -> DensityState:
    """Build the initial density and scale it so the numeric M(4) equals ``V_target``."""
    if not V_target > 0.0:
        raise ConfigError(f"target volume must be > 0, got {V_target}")
    shape = _shape(spec, grid)
    v = _moment(grid, shape, 4.0)
    if not v > 0.0:
        raise ConfigError("initial condition has no volume on this grid")
    return DensityState(grid, shape * (V_target / v), 0.0)


# --- moments ----------------------------------------------------------------


def _moment(grid: SizeGrid, values: np.ndarray, s: float) -> float:
    return float(np.dot(grid.weights * grid.r ** (s - 1.0), values))


def mellin_numeric(state: DensityState, s: float) -> float:
    """Trapezoid estimate of M(s) = int r**(s-1) n(r) dr over the grid."""
    if not S_MIN <= s <= S_MAX:
        raise DomainError(f"Mellin order s={s} outside [{S_MIN}, {S_MAX}]")
    return _moment(state.grid, state.values, s)


def observables(state: DensityState) -> Observables:
    m1 = mellin_numeric(state, 1.0)
    m2 = mellin_numeric(state, 2.0)
    return Observables(
        t=state.t,
        N=m1,
        lam=m2 / m1 if m1 > 0.0 else 0.0,
        S=mellin_numeric(state, 3.0),
        V=mellin_numeric(state, 4.0),
    )
