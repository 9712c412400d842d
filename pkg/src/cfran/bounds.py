"""Closed-form bounds on the ergodic finite-blocklength sum SE under ZF.

Valid for single-antenna RRUs with perfect CSI and full association. The upper
pair uses the per-EDU exclusion-set gain sum as a surrogate SINR; the lower
pair replaces it with the inverted-Gamma mean.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, UnsupportedConfigurationError
from .fbl import LOG2E, q_inv

log = logging.getLogger(__name__)

PSI_FLOOR = 1.0 + 1e-9


@dataclass(frozen=True)
class GammaParams:
    shape: float  # Psi
    scale: float  # Phi

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale ** 2


@dataclass(frozen=True)
class BoundResult:
    x_ub: float
    x_lb: float
    y_ub: float
    y_lb: float
    r_ub: float
    r_lb: float
    surrogate_ub: np.ndarray  # per-UE SINR surrogates
    surrogate_lb: np.ndarray
    exclusion_sets: list  # [k][m] -> RRU indices


def _check_single_antenna(N):
    if N != 1:
        raise UnsupportedConfigurationError(
            f"closed-form bounds assume single-antenna RRUs (N=1), got N={N}")


def _strongest(beta, members):
    """Strongest RRU of every UE among ``members``; ties go to the lowest index."""
    members = np.asarray(members)
    return members[np.argmax(beta[:, members], axis=1)]


def exclusion_set(beta, partition, k, check=True) -> list[np.ndarray]:
    """Per-EDU RRU sets left after removing every other UE's strongest RRU."""
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[0]
    others = np.delete(np.arange(K), k)
    out = []
    for m, members in enumerate(partition.groups):
        members = np.sort(np.asarray(members))
        removed = np.unique(_strongest(beta[others], members)) if others.size else []
        kept = np.setdiff1d(members, removed)
        if check and kept.size == 0:
            raise DegenerateGeometryError(
                f"exclusion set of UE {k} in EDU {m} is empty; add RRUs per EDU", ue=k, edu=m)
        out.append(kept)
    return out


def exclusion_sets(beta, partition, check=True) -> list[list[np.ndarray]]:
    return [exclusion_set(beta, partition, k, check) for k in range(np.shape(beta)[0])]


def gamma_params(beta_subset) -> GammaParams:
    """Moment-matched Gamma law of a sum of independent exponentials with means ``beta``."""
    b = np.asarray(beta_subset, dtype=float).ravel()
    if b.size == 0:
        raise ValueError("gamma_params needs a nonempty set")
    if np.any(b <= 0):
        raise ValueError("gains must be positive")
    s1, s2 = b.sum(), (b ** 2).sum()
    return GammaParams(shape=float(s1 ** 2 / s2), scale=float(s2 / s1))


def gamma_sum_approx(components) -> GammaParams:
    """Single Gamma matching the first two moments of a sum of independent Gammas.

    ``components`` is a sequence of (shape, scale) pairs.
    """
    comps = np.asarray(list(components), dtype=float).reshape(-1, 2)
    if comps.shape[0] == 0:
        raise ValueError("gamma_sum_approx needs at least one component")
    k, th = comps[:, 0], comps[:, 1]
    if np.any(k <= 0) or np.any(th <= 0):
        raise ValueError("shapes and scales must be positive")
    m1, m2 = (k * th).sum(), (k * th ** 2).sum()
    return GammaParams(shape=float(m1 ** 2 / m2), scale=float(m2 / m1))


def _power(p, K):
    return np.broadcast_to(np.asarray(p, dtype=float), (K,))


def surrogate_upper(beta, partition, p, sets=None) -> np.ndarray:
    """``p_i sum_m sum_{l in exclusion set} beta_{l,i}`` for every UE."""
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[0]
    sets = exclusion_sets(beta, partition) if sets is None else sets
    g = np.array([sum(beta[i, s].sum() for s in sets[i]) for i in range(K)])
    return _power(p, K) * g


def surrogate_lower(beta, partition, p, sets=None) -> np.ndarray:
    """``p_i M^2 / sum_m 1/(Phi (Psi - 1))`` for every UE."""
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[0]
    M = partition.num_groups
    sets = exclusion_sets(beta, partition) if sets is None else sets
    inv = np.zeros(K)
    for i in range(K):
        for m, s in enumerate(sets[i]):
            gp = gamma_params(beta[i, s])
            if gp.shape <= PSI_FLOOR:
                raise DegenerateGeometryError(
                    f"inverted-Gamma mean diverges for UE {i} in EDU {m} (Psi={gp.shape:.6g}); "
                    "add RRUs per EDU", ue=i, edu=m)
            inv[i] += 1.0 / (gp.scale * (gp.shape - 1.0))
    return _power(p, K) * M ** 2 / inv


def _x(s):
    return float(np.log2(1.0 + s).sum())


def _y(s, n, eps, unscaled_dispersion):
    K = s.size
    factor = 1.0 if unscaled_dispersion else LOG2E
    inner = max(K - float(((1.0 + s) ** -2).sum()), 0.0)
    return float(q_inv(eps) / np.sqrt(n) * factor * np.sqrt(inner))


def x_upper(beta, partition, p) -> float:
    return _x(surrogate_upper(beta, partition, p))


def x_lower(beta, partition, p) -> float:
    return _x(surrogate_lower(beta, partition, p))


def y_upper(beta, partition, p, n, eps, unscaled_dispersion=False) -> float:
    return _y(surrogate_upper(beta, partition, p), n, eps, unscaled_dispersion)


def y_lower(beta, partition, p, n, eps, unscaled_dispersion=False) -> float:
    return _y(surrogate_lower(beta, partition, p), n, eps, unscaled_dispersion)


def bounds_from_surrogates(s_ub, s_lb, n, eps, unscaled_dispersion=False, sets=None) -> BoundResult:
    s_ub, s_lb = np.asarray(s_ub, dtype=float), np.asarray(s_lb, dtype=float)
    x_ub, x_lb = _x(s_ub), _x(s_lb)
    y_ub = _y(s_ub, n, eps, unscaled_dispersion)
    y_lb = _y(s_lb, n, eps, unscaled_dispersion)
    return BoundResult(x_ub, x_lb, y_ub, y_lb, x_ub - y_lb, max(0.0, x_lb - y_ub), s_ub, s_lb, sets)


def se_bounds(beta, partition, p, n, eps, N=1, unscaled_dispersion=False) -> BoundResult:
    """Sandwich ``x_lb - y_ub <= E[R] <= x_ub - y_lb``; the lower end is clamped at 0."""
    _check_single_antenna(N)
    sets = exclusion_sets(beta, partition)
    s_ub = surrogate_upper(beta, partition, p, sets)
    s_lb = surrogate_lower(beta, partition, p, sets)
    return bounds_from_surrogates(s_ub, s_lb, n, eps, unscaled_dispersion, sets)


def distance_se_lower(ue_rru_dist, partition, k, p, alpha, sets=None, literal=False) -> float:
    """Distance-only lower bound on UE k's upper-bound SE term under free-space loss.

    By Jensen, ``sum_l d^-alpha >= n (mean d^2)^(-alpha/2)`` per EDU, which is
    tight at equal distances. ``literal=True`` uses ``(sum d^2)^(-alpha/2)``
    without the set-size normalization (a looser bound).
    """
    d = np.maximum(np.asarray(ue_rru_dist, dtype=float), 1.0)
    if sets is None:
        sets = exclusion_set(d ** -alpha, partition, k)
    total = 0.0
    for s in sets:
        d2 = d[k, s] ** 2
        if literal:
            total += d2.sum() ** (-alpha / 2.0)
        else:
            total += s.size * d2.mean() ** (-alpha / 2.0)
    return float(np.log2(1.0 + p * total))


def exact_gain_term(ue_rru_dist, partition, k, p, alpha, sets=None) -> float:
    """``log2(1 + p sum_m sum_l d^-alpha)`` over the exclusion sets of UE k."""
    d = np.maximum(np.asarray(ue_rru_dist, dtype=float), 1.0)
    beta = d ** -alpha
    if sets is None:
        sets = exclusion_set(beta, partition, k)
    return float(np.log2(1.0 + p * sum(beta[k, s].sum() for s in sets)))


def schur_diagnostic(H_m, beta_m) -> float:
    """Mean relative gap between the exact ZF gain ``1/[(H^H H)^-1]_kk`` and the
    exclusion-set energy ``sum |h_kl|^2`` for one EDU (logged, not asserted)."""
    H_m = np.asarray(H_m, dtype=complex)
    K = H_m.shape[1]
    G = H_m.conj().T @ H_m
    exact = 1.0 / np.real(np.diag(np.linalg.solve(G, np.eye(K))))
    strongest = np.argmax(np.asarray(beta_m), axis=1)
    approx = np.empty(K)
    for k in range(K):
        drop = np.unique(np.delete(strongest, k))
        keep = np.setdiff1d(np.arange(H_m.shape[0]), drop)
        approx[k] = np.sum(np.abs(H_m[keep, k]) ** 2)
    err = float(np.mean(np.abs(approx - exact) / exact))
    log.info("Schur approximation mean relative error %.4f", err)
    return err
