"""Subdivision kernels P(x) on [0, 1] and their Mellin moments.

A kernel describes the density of splinter-size fractions x = rho/r produced
per unit time by a decaying parent of size r.  Its moments

    p(s) = int_0^1 x**(s - 1) P(x) dx

drive the moment chain of the kinetic equation, and p(4) is the decay
intensity coefficient required by volume conservation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "PowerLaw",
    "Tabulated",
    "Kernel",
    "eval_kernel",
    "mellin_p",
    "truncated_moment",
    "mu_coeff",
    "splinter_mean_count",
    "kernel_from_dict",
    "kernel_to_dict",
]


@dataclass(frozen=True)
class PowerLaw:
    """P(x) = C * x**alpha.

    ``alpha = 0`` and ``C = 0`` are accepted as degenerate cases used by
    oracle checks (uniform splinters, frozen dynamics).
    """

    alpha: float
    C: float

    def __post_init__(self):
        alpha, C = float(self.alpha), float(self.C)
        if not (np.isfinite(alpha) and alpha >= 0.0):
            raise ConfigError(f"power-law exponent must be >= 0, got {self.alpha!r}")
        if not (np.isfinite(C) and C >= 0.0):
            raise ConfigError(f"power-law rate scale must be >= 0, got {self.C!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "C", C)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear P(x) through ``(nodes[j], values[j])``, nodes spanning [0, 1]."""

    nodes: tuple
    values: tuple

    def __post_init__(self):
        nodes = tuple(float(v) for v in self.nodes)
        values = tuple(float(v) for v in self.values)
        if len(nodes) < 2:
            raise ConfigError("tabulated kernel needs at least 2 nodes")
        if len(values) != len(nodes):
            raise ConfigError(
                f"tabulated kernel has {len(nodes)} nodes but {len(values)} values"
            )
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ConfigError("tabulated kernel nodes must start at 0 and end at 1")
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise ConfigError("tabulated kernel nodes must be strictly increasing")
        if not all(np.isfinite(v) and v >= 0.0 for v in values):
            raise ConfigError("tabulated kernel values must be finite and >= 0")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def _segments(self):
        x = np.asarray(self.nodes)
        y = np.asarray(self.values)
        return x, y, np.diff(y) / np.diff(x)


Kernel = Union[PowerLaw, Tabulated]


def eval_kernel(kernel: Kernel, x):
    """Evaluate P(x) for x in [0, 1] (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0.0) or np.any(xa > 1.0):
        raise DomainError("kernel argument must lie in [0, 1]")
    if isinstance(kernel, PowerLaw):
        out = kernel.C * np.power(xa, kernel.alpha)
    else:
        out = np.interp(xa, kernel.nodes, kernel.values)
    return float(out) if out.ndim == 0 else out


def _segment_integral(a, b, ya, slope, s):
    """int_a^b x**(s-1) * (ya + slope*(x - a)) dx for arrays of segments."""
    a, b, ya, slope = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, ya, slope)))
    h = b - a
    d_s = (b**s - a**s) / s
    d_s1 = (b ** (s + 1) - a ** (s + 1)) / (s + 1)
    closed = ya * d_s + slope * (d_s1 - a * d_s)
    # the difference form cancels on very short segments; Simpson is exact to
    # rounding there because x**(s-1) is nearly constant across the segment
    mid = 0.5 * (a + b)
    yb = ya + slope * h
    simpson = h / 6.0 * (a ** (s - 1) * ya + 4.0 * mid ** (s - 1) * (ya + 0.5 * slope * h) + b ** (s - 1) * yb)
    short = h < 1e-3 * np.abs(b)
    return np.where(short, simpson, closed)


def truncated_moment(kernel: Kernel, s: float, upper):
    """Return int_0^upper x**(s-1) P(x) dx for ``0 <= upper <= 1``.

    Computed in closed form for both kernel variants; ``upper`` may be an array.
    """
    s = float(s)
    if s <= 0.0:
        raise DomainError(f"truncated moment needs s > 0, got {s}")
    b = np.asarray(upper, dtype=float)
    if np.any(b < 0.0) or np.any(b > 1.0):
        raise DomainError("upper limit must lie in [0, 1]")
    if isinstance(kernel, PowerLaw):
        out = kernel.C * np.power(b, kernel.alpha + s) / (kernel.alpha + s)
    else:
        x, y, slope = kernel._segments()
        full = _segment_integral(x[:-1], x[1:], y[:-1], slope, s)
        cumulative = np.concatenate(([0.0], np.cumsum(full)))
        k = np.clip(np.searchsorted(x, b, side="right") - 1, 0, len(x) - 2)
        out = cumulative[k] + _segment_integral(x[k], b, y[k], slope[k], s)
    return float(out) if out.ndim == 0 else out


def mellin_p(kernel: Kernel, s: float) -> float:
    """Mellin moment p(s) = int_0^1 x**(s-1) P(x) dx, for s >= 1."""
    s = float(s)
    if not s >= 1.0:
        raise DomainError(f"Mellin moment requires s >= 1, got {s}")
    if isinstance(kernel, PowerLaw):
        return kernel.C / (kernel.alpha + s)
    return float(truncated_moment(kernel, s, 1.0))


def mu_coeff(kernel: Kernel) -> float:
    """Decay intensity coefficient mu = p(4); the decay rate of size r is mu*r."""
    return mellin_p(kernel, 4.0)


def splinter_mean_count(kernel: Kernel) -> float:
    """Mean number of splinters per decay event, p(1)/p(4)."""
    p4 = mu_coeff(kernel)
    if p4 == 0.0:
        raise ZeroDivisionError("zero kernel has no decays, splinter count undefined")
    return mellin_p(kernel, 1.0) / p4


def kernel_from_dict(spec: dict) -> Kernel:
    """Build a kernel from ``{"type": "power_law", ...}`` or ``{"type": "tabulated", ...}``."""
    if not isinstance(spec, dict):
        raise ConfigError("kernel spec must be a JSON object")
    kind = spec.get("type")
    try:
        if kind == "power_law":
            return PowerLaw(alpha=spec["alpha"], C=spec["C"])
        if kind == "tabulated":
            return Tabulated(nodes=tuple(spec["nodes"]), values=tuple(spec["values"]))
    except KeyError as exc:
        raise ConfigError(f"kernel spec missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ConfigError(f"malformed kernel spec: {exc}") from None
    raise ConfigError(f"unknown kernel type {kind!r}")


def kernel_to_dict(kernel: Kernel) -> dict:
    if isinstance(kernel, PowerLaw):
        return {"type": "power_law", "alpha": kernel.alpha, "C": kernel.C}
    return {"type": "tabulated", "nodes": list(kernel.nodes), "values": list(kernel.values)}
