"""Per-EDU receive combining and uplink SINR evaluation.

Combiners of all EDUs are stacked into one (L*N, K) matrix laid out like the
channel, so summing ``v_{k,m}^H h_{i,m}`` over EDUs is a plain inner product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import SingularChannelError

COND_LIMIT = 1e12


def zf_combiner(H_m, edu=None) -> np.ndarray:
    """``H (H^H H)^{-1}`` through a thin QR factorization."""
    H_m = np.asarray(H_m, dtype=complex)
    rows, K = H_m.shape
    label = "" if edu is None else f" in EDU {edu}"
    if rows < K:
        raise SingularChannelError(f"ZF needs at least {K} antennas{label}, got {rows}", edu=edu)
    Q, R = qr(H_m, mode="economic")
    d = np.abs(np.diag(R))
    sv = np.linalg.svd(R, compute_uv=False)
    if d.min() == 0.0 or sv[0] > COND_LIMIT * sv[-1]:
        raise SingularChannelError(f"channel matrix is singular or ill-conditioned{label}", edu=edu)
    R_inv_h = solve_triangular(R.conj().T, np.eye(K), lower=True)
    return Q @ R_inv_h


def mr_combiner(H_hat_m, mask=None) -> np.ndarray:
    H_hat_m = np.asarray(H_hat_m, dtype=complex)
    return H_hat_m if mask is None else np.where(mask, H_hat_m, 0.0)


def mmse_combiner(H_hat_m, p, sigma2=1.0, mask=None) -> np.ndarray:
    """Combiners ``p_k (sum_i p_i D h_i h_i^H D + sigma2 I)^{-1} D h_k`` for one EDU.

    ``mask`` is the (rows, K) diagonal of each UE's selection matrix; ``None``
    means full association. The push-through identity turns the rows x rows
    solve into a K x K one.
    """
    H = np.asarray(H_hat_m, dtype=complex)
    rows, K = H.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    reg = np.diag(sigma2 / p)
    if mask is None or np.all(mask):
        A = H.conj().T @ H + reg
        return H @ np.linalg.solve(A, np.eye(K))
    V = np.zeros((rows, K), dtype=complex)
    for k in range(K):
        sel = np.flatnonzero(mask[:, k])
        if sel.size == 0:
            continue
        Hs = H[sel]
        A = Hs.conj().T @ Hs + reg
        V[sel, k] = Hs @ np.linalg.solve(A, np.eye(K)[:, k])
    return V


def stack_combiners(blocks, row_sets, total_rows) -> np.ndarray:
    """Place per-EDU combiner blocks into a network-wide (L*N, K) matrix."""
    K = blocks[0].shape[1]
    V = np.zeros((total_rows, K), dtype=complex)
    for block, rows in zip(blocks, row_sets):
        V[rows] = block
    return V


def zf_sinr(blocks, p, sigma2=1.0) -> np.ndarray:
    """Closed-form ZF SINR ``p M^2 / (sigma2 sum_m ||v_{k,m}||^2)``."""
    M = len(blocks)
    norms = sum(np.sum(np.abs(V) ** 2, axis=0) for V in blocks)
    return np.asarray(p, dtype=float) * M ** 2 / (sigma2 * norms)


def sinr_terms(V, H, p):
    """Per-UE signal gain ``v_k^H h_k``, interference power and combiner norm."""
    G = V.conj().T @ H
    K = G.shape[0]
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    power = np.abs(G) ** 2 * p[None, :]
    off = ~np.eye(K, dtype=bool)
    interference = np.where(off, power, 0.0).sum(axis=1)
    return np.diag(G).copy(), interference, np.sum(np.abs(V) ** 2, axis=0)


def instantaneous_sinr(V, H, p, sigma2=1.0) -> np.ndarray:
    """SINR of each UE for one channel realization and stacked combiners."""
    gain, interference, norm = sinr_terms(V, H, p)
    p = np.broadcast_to(np.asarray(p, dtype=float), gain.shape)
    return p * np.abs(gain) ** 2 / (interference + sigma2 * norm)


@dataclass(frozen=True)
class UatfResult:
    gamma: np.ndarray
    stderr: np.ndarray
    samples: int


def uatf_sinr(gains, interference, norms, p, sigma2=1.0) -> UatfResult:
    """Hardening SINR ``p |E[g]|^2 / (E[I] + sigma2 E[||v||^2])`` from samples.

    ``gains`` (S, K) complex ``v_k^H h_k``; ``interference`` (S, K) co-UE power;
    ``norms`` (S, K) combiner energies. Standard errors use the delta method.
    """
    a = np.asarray(gains, dtype=complex)
    b = np.asarray(interference, dtype=float) + sigma2 * np.asarray(norms, dtype=float)
    S, K = a.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    gamma = p * np.abs(ma) ** 2 / mb
    stderr = np.zeros(K)
    if S > 1:
        for k in range(K):
            X = np.stack([a[:, k].real, a[:, k].imag, b[:, k]])
            grad = np.array([2 * p[k] * ma[k].real / mb[k], 2 * p[k] * ma[k].imag / mb[k],
                             -gamma[k] / mb[k]])
            cov = np.atleast_2d(np.cov(X))
            stderr[k] = np.sqrt(max(float(grad @ cov @ grad), 0.0) / S)
    return UatfResult(gamma, stderr, S)
