"""Closed-form moment laws of the fragmentation equation.

The moment chain dM(s)/dt = (p(s) - mu) M(s+1) with M(4) = V fixed gives an
exactly linear surface M(3) and, to leading order in t, M(2) ~ t**2,
M(1) ~ t**3 and a mean size lambda ~ 1/t.  Generic laws take the kernel
moments p(1..4); the ``*_powerlaw`` style functions are the same laws with
p(s) = C/(alpha+s) substituted by hand, kept separate so the two routes can
be checked against each other.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kernel import Kernel, mellin_p

__all__ = [
    "AsymptoticLaws",
    "m3_exact",
    "m2_asympt",
    "m1_asympt",
    "lambda_asympt",
    "surface_asympt",
    "lambda_powerlaw",
    "number_asympt",
    "exact_moments",
]


@dataclass(frozen=True)
class AsymptoticLaws:
    p1: float
    p2: float
    p3: float
    p4: float
    V: float
    M3_0: float = 0.0

    def __post_init__(self):
        if not (self.p1 > self.p2 > self.p3 > self.p4 > 0.0):
            raise DomainError("kernel moments must satisfy p(1) > p(2) > p(3) > p(4) > 0")

    @classmethod
    def from_kernel(cls, kernel: Kernel, V: float, M3_0: float = 0.0) -> "AsymptoticLaws":
        p = [mellin_p(kernel, s) for s in (1, 2, 3, 4)]
        return cls(*p, V=V, M3_0=M3_0)

    @classmethod
    def power_law(cls, alpha: float, C: float, V: float, M3_0: float = 0.0) -> "AsymptoticLaws":
        """Laws for P(x) = C x**alpha; alpha = 0 is allowed here for oracle checks."""
        if alpha < 0.0 or C <= 0.0:
            raise DomainError(f"need alpha >= 0 and C > 0, got alpha={alpha}, C={C}")
        return cls(*(C / (alpha + s) for s in (1, 2, 3, 4)), V=V, M3_0=M3_0)

    @property
    def mu(self) -> float:
        return self.p4


def _t(t, strict: bool):
    ta = np.asarray(t, dtype=float)
    bad = ta <= 0.0 if strict else ta < 0.0
    if np.any(bad):
        raise DomainError(f"time must be {'> 0' if strict else '>= 0'}")
    return ta


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


def m3_exact(t, laws: AsymptoticLaws):
    """Total surface M(3, t) = M(3, 0) + V (p(3) - p(4)) t, exact for all t."""
    return _out(laws.M3_0 + laws.V * (laws.p3 - laws.p4) * _t(t, strict=False))


def m2_asympt(t, laws: AsymptoticLaws):
    c = 0.5 * laws.V * (laws.p3 - laws.p4) * (laws.p2 - laws.p4)
    return _out(c * _t(t, strict=True) ** 2)


def m1_asympt(t, laws: AsymptoticLaws):
    c = laws.V * (laws.p3 - laws.p4) * (laws.p2 - laws.p4) * (laws.p1 - laws.p4) / 6.0
    return _out(c * _t(t, strict=True) ** 3)


def lambda_asympt(t, laws: AsymptoticLaws):
    """Mean fragment size 3 / ((p(1) - p(4)) t)."""
    return _out(3.0 / ((laws.p1 - laws.p4) * _t(t, strict=True)))


def _check_power_law(alpha: float, C: float, V: float = 1.0) -> None:
    if alpha < 0.0 or C <= 0.0 or V <= 0.0:
        raise DomainError(f"need alpha >= 0, C > 0, V > 0 (got {alpha}, {C}, {V})")


def surface_asympt(t, alpha: float, C: float, V: float):
    _check_power_law(alpha, C, V)
    return _out(C * V * _t(t, strict=True) / ((alpha + 3.0) * (alpha + 4.0)))


def lambda_powerlaw(t, alpha: float, C: float):
    _check_power_law(alpha, C)
    return _out((alpha + 1.0) * (alpha + 4.0) / (C * _t(t, strict=True)))


def number_asympt(t, alpha: float, C: float, V: float):
    _check_power_law(alpha, C, V)
    denom = (alpha + 4.0) ** 3 * (alpha + 1.0) * (alpha + 2.0) * (alpha + 3.0)
    return _out(C**3 * V * _t(t, strict=True) ** 3 / denom)


def exact_moments(t, laws: AsymptoticLaws, M1_0: float, M2_0: float) -> dict:
    """Integrate the moment chain exactly from given initial moments.

    With M(4) constant the chain closes into polynomials in t; the leading
    terms are the asymptotic laws above.  Useful as a finite-time oracle.
    """
    ta = _t(t, strict=False)
    a, b, c = laws.p3 - laws.p4, laws.p2 - laws.p4, laws.p1 - laws.p4
    V, M3_0 = laws.V, laws.M3_0
    M3 = M3_0 + V * a * ta
    M2 = M2_0 + b * (M3_0 * ta + V * a * ta**2 / 2.0)
    M1 = M1_0 + c * (M2_0 * ta + b * (M3_0 * ta**2 / 2.0 + V * a * ta**3 / 6.0))
    return {"M1": _out(M1), "M2": _out(M2), "M3": _out(M3), "M4": _out(V + 0.0 * ta)}

