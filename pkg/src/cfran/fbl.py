"""Finite-blocklength normal approximation of achievable rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv

LOG2E = float(np.log2(np.e))
LOG2E_SQ = LOG2E ** 2
_SQRT2 = float(np.sqrt(2.0))
_SQRT2PI = float(np.sqrt(2.0 * np.pi))


def q_func(x):
    """Upper tail of the standard normal distribution."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def q_inv(p):
    """Inverse of :func:`q_func` on (0, 1), polished by two Newton steps."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)) or np.any(np.isnan(p)):
        raise ValueError("q_inv needs 0 < p < 1")
    x = _SQRT2 * erfcinv(2.0 * p)
    for _ in range(2):
        pdf = np.exp(-0.5 * x * x) / _SQRT2PI
        x = x + (q_func(x) - p) / pdf
    return x if x.ndim else float(x)


def dispersion(gamma):
    """Channel dispersion in bits^2 for a linear SINR ``gamma``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("SINR must be nonnegative")
    v = (1.0 - (1.0 + g) ** -2) * LOG2E_SQ
    return v if v.ndim else float(v)


def fbl_rate(gamma, n, eps):
    """Per-UE rate log2(1+gamma) - sqrt(V/n) Q^-1(eps), clamped at zero."""
    g = np.asarray(gamma, dtype=float)
    r = np.log2(1.0 + g) - np.sqrt(dispersion(g) / n) * q_inv(eps)
    r = np.maximum(r, 0.0)
    return r if r.ndim else float(r)


@dataclass(frozen=True)
class FblResult:
    capacity: float
    dispersion: float
    rate: float
    per_ue_capacity: np.ndarray
    per_ue_dispersion: np.ndarray


def sum_moments(gammas, unscaled_dispersion=False):
    """Sum capacity and joint dispersion of a set of SINRs (trailing axis = UEs)."""
    g = np.asarray(gammas, dtype=float)
    if np.any(g < 0):
        raise ValueError("SINR must be nonnegative")
    K = g.shape[-1]
    cap = np.log2(1.0 + g).sum(axis=-1)
    disp = K - ((1.0 + g) ** -2).sum(axis=-1)
    if not unscaled_dispersion:
        disp = disp * LOG2E_SQ
    return cap, disp


def sum_fbl_rate(gammas, n, eps, unscaled_dispersion=False) -> FblResult:
    """Sum rate with the joint dispersion of all UEs.

    By default the dispersion carries the log2(e)^2 factor, so one UE reduces
    to :func:`fbl_rate`; ``unscaled_dispersion=True`` drops it.
    """
    g = np.atleast_1d(np.asarray(gammas, dtype=float))
    cap, disp = sum_moments(g, unscaled_dispersion)
    rate = max(float(cap - np.sqrt(disp / n) * q_inv(eps)), 0.0)
    per_v = (1.0 - (1.0 + g) ** -2) * (1.0 if unscaled_dispersion else LOG2E_SQ)
    return FblResult(float(cap), float(disp), rate, np.log2(1.0 + g), per_v)


def error_prob_from_moments(capacity, disp, n, target):
    """Error probability at which the normal approximation meets ``target``.

    Vectorized; entries with ``target > capacity`` come back as NaN.
    """
    cap = np.asarray(capacity, dtype=float)
    disp = np.asarray(disp, dtype=float)
    gap = cap - target
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.sqrt(n / disp) * gap
    out = np.where(disp > 0, q_func(arg), np.where(gap > 0, 0.0, 0.5))
    out = np.where(gap < 0, np.nan, out)
    return out if out.ndim else float(out)


def normal_error_prob(capacity, disp, n, target):
    """``Q(sqrt(n/V) (C - target))`` without the achievability check (can exceed 0.5)."""
    cap = np.asarray(capacity, dtype=float)
    disp = np.asarray(disp, dtype=float)
    gap = cap - target
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.sqrt(n / disp) * gap
    out = np.where(disp > 0, q_func(arg), np.where(gap > 0, 0.0, np.where(gap < 0, 1.0, 0.5)))
    return out if out.ndim else float(out)


def solve_error_prob(gammas, n, target_rate, unscaled_dispersion=False) -> float:
    """Invert the sum-rate expression for the error probability at ``target_rate``."""
    cap, disp = sum_moments(np.atleast_1d(gammas), unscaled_dispersion)
    if target_rate > cap:
        raise ValueError("target rate is unachievable even asymptotically "
                         f"(target {target_rate:.6g} > capacity {float(cap):.6g})")
    return float(error_prob_from_moments(cap, disp, n, target_rate))
