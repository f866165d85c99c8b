"""Diagnostics comparing a solver trajectory with the exact moment laws."""
from __future__ import annotations

import numpy as np

from .kernel import Kernel, mellin_p, mu_coeff
from .pde import Trajectory

__all__ = [
    "conservation_residual",
    "resolved_window",
    "m3_slope",
    "moment_chain_errors",
    "loglog_slope",
    "summarize",
]


def conservation_residual(traj: Trajectory) -> float:
    """max_t |M(4, t) + V_lost(t) - M(4, 0)| relative to M(4, 0)."""
    v0 = traj.V[0]
    return float(np.max(np.abs(traj.V + traj.V_lost - v0)) / v0)


def resolved_window(traj: Trajectory, tol: float = 1e-3) -> np.ndarray:
    """Samples where the volume leaked below the grid is at most ``tol * V(0)``."""
    return traj.V_lost <= tol * traj.V[0]


def m3_slope(traj: Trajectory, window: np.ndarray | None = None) -> float:
    """Least-squares slope of M(3) against t."""
    mask = resolved_window(traj) if window is None else window
    return float(np.polyfit(traj.t[mask], traj.S[mask], 1)[0])


def moment_chain_errors(traj: Trajectory, kernel: Kernel, window: np.ndarray | None = None) -> dict:
    """Largest relative mismatch between centred differences of M(s) and
    (p(s) - mu) M(s+1), for s = 1, 2, 3, over interior samples of the window."""
    mask = resolved_window(traj) if window is None else window
    idx = np.flatnonzero(mask)
    inner = idx[(idx > 0) & (idx < len(traj) - 1)]
    inner = inner[mask[inner - 1] & mask[inner + 1]]
    mu = mu_coeff(kernel)
    out = {}
    for s in (1, 2, 3):
        m = traj.moment(s)
        dm = (m[inner + 1] - m[inner - 1]) / (traj.t[inner + 1] - traj.t[inner - 1])
        predicted = (mellin_p(kernel, s) - mu) * traj.moment(s + 1)[inner]
        out[s] = float(np.max(np.abs(dm / predicted - 1.0))) if inner.size else float("nan")
    return out


def loglog_slope(t: np.ndarray, y: np.ndarray, t_from: float, t_to: float | None = None) -> float:
    """Fitted exponent of y ~ t**k over ``t_from <= t <= t_to``."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    hi = t.max() if t_to is None else t_to
    mask = (t >= t_from) & (t <= hi) & (t > 0) & (y > 0)
    return float(np.polyfit(np.log(t[mask]), np.log(y[mask]), 1)[0])


def summarize(traj: Trajectory, kernel: Kernel) -> dict:
    window = resolved_window(traj)
    expected = traj.V[0] * (mellin_p(kernel, 3) - mu_coeff(kernel))
    summary = {
        "conservation_residual": conservation_residual(traj),
        "final_lost_volume": float(traj.V_lost[-1]),
        "clipped_number": float(traj.clipped_number[-1]),
        "steps": traj.n_steps,
        "dt": traj.dt,
    }
    if window.sum() >= 3 and traj.t[-1] > 0:
        slope = m3_slope(traj, window)
        summary["m3_slope"] = slope
        summary["m3_slope_expected"] = expected
        summary["m3_slope_rel_error"] = abs(slope / expected - 1.0) if expected else None
        summary["moment_chain_rel_error"] = {
            str(s): v for s, v in moment_chain_errors(traj, kernel, window).items()
        }
    if traj.t[-1] > 0 and traj.N[-1] > 0:
        summary["final_lambda_t"] = float(traj.lam[-1] * traj.t[-1])
        p1_minus_mu = mellin_p(kernel, 1) - mu_coeff(kernel)
        if p1_minus_mu > 0:
            summary["lambda_t_limit"] = 3.0 / p1_minus_mu
    return summary
