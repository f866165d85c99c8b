"""Gamma-type limit law of rescaled fragment sizes and distances to it.

For the power-law kernel P(x) = C x**alpha the density of r / lambda(t)
tends to

    f(x) = (alpha+1)**(alpha+1) x**alpha exp(-(alpha+1) x) / Gamma(alpha+1),

whose Mellin transform is F(s) = Gamma(alpha+s) / (Gamma(alpha+1) (alpha+1)**(s-1)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistributionError, DomainError, EmptyPopulationError
from .grid import DensityState

__all__ = [
    "log_gamma",
    "LimitLaw",
    "limit_density",
    "limit_mellin_F",
    "limit_cdf",
    "RescaledDensity",
    "rescale",
    "distance_to_limit",
    "fit_alpha",
    "alpha_from_variance",
]

# Lanczos approximation, g = 607/128, 15 terms (Godfrey's coefficients)
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_COEF = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(x):
    """Natural log of the gamma function for x > 0 (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0.0)) or np.any(~np.isfinite(xa)):
        raise DomainError("log_gamma is defined here only for finite x > 0")
    # shift small arguments up: lgamma(x) = lgamma(x + 1) - log(x)
    small = xa < 0.5
    z = np.where(small, xa + 1.0, xa) - 1.0
    series = np.full_like(z, _LANCZOS_COEF[0])
    for k, c in enumerate(_LANCZOS_COEF[1:], start=1):
        series = series + c / (z + k)
    tmp = z + _LANCZOS_G + 0.5
    out = _HALF_LOG_TWO_PI + (z + 0.5) * np.log(tmp) - tmp + np.log(series)
    out = np.where(small, out - np.log(xa), out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LimitLaw:
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise DomainError(f"limit law needs alpha > 0, got {self.alpha}")

    def density(self, x):
        return limit_density(self.alpha, x)

    def mellin(self, s):
        return limit_mellin_F(self.alpha, s)

    def cdf(self, x, tol: float = 1e-8):
        return limit_cdf(self.alpha, x, tol)

    @property
    def variance(self) -> float:
        return 1.0 / (self.alpha + 1.0)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise DomainError(f"alpha must be > 0, got {alpha}")
    return alpha


def limit_density(alpha: float, r):
    """Limit density f(r), evaluated in log space."""
    alpha = _check_alpha(alpha)
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0.0) or np.any(~np.isfinite(ra)):
        raise DomainError("limit density needs finite r >= 0")
    a1 = alpha + 1.0
    with np.errstate(divide="ignore"):
        log_f = a1 * math.log(a1) + alpha * np.log(ra) - a1 * ra - log_gamma(a1)
    out = np.exp(log_f)
    return float(out) if out.ndim == 0 else out


def limit_mellin_F(alpha: float, s):
    """Mellin transform F(s) of the limit density, for s >= 0.5."""
    alpha = _check_alpha(alpha)
    sa = np.asarray(s, dtype=float)
    if np.any(~(sa >= 0.5)):
        raise DomainError("F(s) is evaluated only for s >= 0.5")
    a1 = alpha + 1.0
    out = np.exp(log_gamma(alpha + sa) - log_gamma(a1) - (sa - 1.0) * math.log(a1))
    return float(out) if out.ndim == 0 else out


def _trapezoid_refined(f, a: np.ndarray, b: np.ndarray, tol: float, max_level: int = 30):
    """Integrate ``f`` over each interval [a_k, b_k] with trapezoid panels,
    halving the panel width on every interval whose estimate still moves by
    more than its share of ``tol``."""
    h = b - a
    est = 0.5 * h * (f(a) + f(b))
    share = tol / max(len(a), 1)
    active = np.arange(len(a))
    m = 1
    for _ in range(max_level):
        if active.size == 0:
            break
        offsets = (np.arange(m) + 0.5) / m
        mid = a[active, None] + h[active, None] * offsets[None, :]
        new = 0.5 * est[active] + 0.5 * (h[active] / m) * f(mid).sum(axis=1)
        # trapezoid error after halving is about a third of the change
        err = np.abs(new - est[active]) / 3.0
        est[active] = new
        active = active[err > share]
        m *= 2
    return est


def limit_cdf(alpha: float, x, tol: float = 1e-8):
    """CDF of the limit law at sorted points ``x`` by refined trapezoid quadrature."""
    alpha = _check_alpha(alpha)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa < 0.0) or np.any(np.diff(xa) < 0.0):
        raise DomainError("CDF points must be sorted and >= 0")
    a = np.concatenate(([0.0], xa[:-1]))
    pieces = _trapezoid_refined(lambda u: limit_density(alpha, u), a, xa, tol)
    return np.minimum(np.cumsum(pieces), 1.0)


@dataclass
class RescaledDensity:
    """Density ``g`` of r / lambda(t) at support points ``x``."""

    x: np.ndarray
    g: np.ndarray
    t: float
    lam: float

    @property
    def weights(self) -> np.ndarray:
        dx = np.diff(self.x)
        w = np.zeros_like(self.x)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
        return w

    def moment(self, k: int) -> float:
        return float(self.weights @ (self.x**k * self.g))

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def variance(self) -> float:
        return self.moment(2) - self.moment(1) ** 2

    def cdf(self) -> np.ndarray:
        dx = np.diff(self.x)
        return np.concatenate(([0.0], np.cumsum(0.5 * dx * (self.g[1:] + self.g[:-1]))))


def rescale(state: DensityState) -> RescaledDensity:
    """Map sizes to r / lambda with lambda = M(2)/M(1), normalised to unit mass."""
    w, r = state.grid.weights, state.grid.r
    N = float(w @ state.values)
    if not N > 0.0:
        raise EmptyPopulationError("cannot rescale a density with no fragments")
    lam = float(w @ (r * state.values)) / N
    x = r / lam
    g = lam * state.values / N
    out = RescaledDensity(x=x, g=g, t=state.t, lam=lam)
    out.g = g / float(out.weights @ g)
    return out


def distance_to_limit(g: RescaledDensity, alpha: float) -> dict:
    """Kolmogorov-Smirnov and L1 distances between ``g`` and the limit law."""
    law_cdf = limit_cdf(alpha, g.x)
    ks = float(np.max(np.abs(g.cdf() - law_cdf)))
    l1 = float(g.weights @ np.abs(g.g - limit_density(alpha, g.x)))
    return {"ks": min(ks, 1.0), "l1": l1}


def alpha_from_variance(variance: float) -> float:
    if not variance > 0.0:
        raise DegenerateDistributionError(f"variance must be > 0, got {variance}")
    return max(1.0 / variance - 1.0, 1e-6)


def fit_alpha(g: RescaledDensity) -> float:
    """Moment-matching estimate: the limit law has mean 1 and variance 1/(alpha+1)."""
    return alpha_from_variance(g.variance)
