"""Large-scale fading, spatial correlation, channel draws and pilot-based estimation.

Channel matrices are stored as ``(L*N, K)`` complex arrays whose rows are
RRU-major and antenna-minor: row ``l*N + a`` is antenna ``a`` of RRU ``l``.
Powers are noise-normalized, so the default noise variance is 1.
"""
from __future__ import annotations

import functools
import struct
from dataclasses import dataclass

import numpy as np

from .scenario import Geometry, ScenarioConfig

LOG10 = np.log(10.0)


def path_loss_free_space(d, alpha):
    """Free-space gain ``d**-alpha``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = d ** (-float(alpha))
    return float(out) if out.ndim == 0 else out


def path_loss_3gpp(d, shadow_db=0.0):
    """Urban microcell gain ``-30.5 - 36.7 log10(d) + F`` dB, returned in linear scale."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    gain_db = -30.5 - 36.7 * np.log10(d) + np.asarray(shadow_db, dtype=float)
    out = 10.0 ** (gain_db / 10.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class LargeScaleFading:
    beta: np.ndarray  # (K, L) linear gains
    shadow_db: np.ndarray  # (K, L)


def large_scale_fading(config: ScenarioConfig, geometry: Geometry, rng: np.random.Generator) -> LargeScaleFading:
    d = geometry.ue_rru_dist
    pl = config.path_loss
    if pl.model == "free_space":
        return LargeScaleFading(path_loss_free_space(d, pl.exponent), np.zeros_like(d))
    shadow = pl.shadow_sigma_db * rng.standard_normal(d.shape)
    d3 = np.sqrt(d**2 + config.antenna_height**2)
    return LargeScaleFading(path_loss_3gpp(d3, shadow), shadow)


# ---------------------------------------------------------------------------
# Spatial correlation (ULA, half-wavelength spacing, Gaussian local scattering)

AZIMUTH_NODES = 200
ELEVATION_NODES = 16


@functools.lru_cache(maxsize=8)
def _hermite(n):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / w.sum()


def _lag_values(bearings, N, asd_az, asd_el):
    """E[exp(j*pi*lag*sin(phi)*cos(theta))] for lags 0..N-1, per bearing."""
    bearings = np.atleast_1d(np.asarray(bearings, dtype=float))
    xa, wa = _hermite(AZIMUTH_NODES if asd_az > 0 else 1)
    xe, we = _hermite(ELEVATION_NODES if asd_el > 0 else 1)
    phi = bearings[:, None] + asd_az * xa[None, :]  # (B, A)
    cos_t = np.cos(asd_el * xe)  # (E,)
    u = np.sin(phi)[:, :, None] * cos_t[None, None, :]  # (B, A, E)
    w2 = wa[:, None] * we[None, :]
    out = np.empty((bearings.size, N), dtype=complex)
    out[:, 0] = 1.0
    for lag in range(1, N):
        out[:, lag] = np.einsum("bae,ae->b", np.exp(1j * np.pi * lag * u), w2)
    return out


def _toeplitz_from_lags(lags):
    """Hermitian Toeplitz matrices from first-column lag values; shape (..., N, N)."""
    N = lags.shape[-1]
    i = np.arange(N)
    diff = i[:, None] - i[None, :]
    mats = lags[..., np.abs(diff)]
    return np.where(diff >= 0, mats, np.conj(mats))


def local_scattering_correlation(bearing, N, asd_azimuth_deg, asd_elevation_deg=0.0):
    """Gaussian local-scattering correlation matrix (trace N) for a nominal bearing in radians."""
    lags = _lag_values([bearing], N, np.deg2rad(asd_azimuth_deg), np.deg2rad(asd_elevation_deg))
    return _toeplitz_from_lags(lags)[0]


TABLE_STEP_DEG = 0.05


@functools.lru_cache(maxsize=8)
def _lag_table(N, asd_az_deg, asd_el_deg):
    grid = np.deg2rad(np.arange(-90.0, 90.0 + TABLE_STEP_DEG / 2, TABLE_STEP_DEG))
    return grid, _lag_values(grid, N, np.deg2rad(asd_az_deg), np.deg2rad(asd_el_deg))


def _fold_bearing(phi):
    """Map bearings onto [-pi/2, pi/2]; the ULA response depends on sin(phi) only."""
    return np.arcsin(np.clip(np.sin(phi), -1.0, 1.0))


def bearings(geometry: Geometry) -> np.ndarray:
    """Nominal azimuth of each UE seen from each RRU, shape (K, L)."""
    delta = geometry.ue_positions[:, None, :] - geometry.rru_positions[None, :, :]
    return np.arctan2(delta[..., 1], delta[..., 0])


def build_correlation(model, geometry: Geometry, k: int, l: int, N: int) -> np.ndarray:
    """Correlation matrix of UE ``k`` at RRU ``l`` (exact quadrature)."""
    if model.model == "iid":
        return np.eye(N, dtype=complex)
    phi = bearings(geometry)[k, l]
    return local_scattering_correlation(phi, N, model.asd_azimuth_deg, model.asd_elevation_deg)


def correlation_set(model, geometry: Geometry, N: int):
    """All (K, L, N, N) correlation matrices, or ``None`` for the IID model.

    Bulk evaluation interpolates a 0.05-degree table of the quadrature; convex
    combinations of unit-diagonal PSD matrices keep both properties exactly.
    """
    if model.model == "iid" or N == 1:
        return None
    grid, table = _lag_table(N, float(model.asd_azimuth_deg), float(model.asd_elevation_deg))
    phi = _fold_bearing(bearings(geometry))
    pos = (phi - grid[0]) / np.deg2rad(TABLE_STEP_DEG)
    i0 = np.clip(np.floor(pos).astype(int), 0, grid.size - 2)
    frac = (pos - i0)[..., None]
    lags = (1.0 - frac) * table[i0] + frac * table[i0 + 1]
    return _toeplitz_from_lags(lags)


def _psd_sqrt(R):
    vals, vecs = np.linalg.eigh(R)
    scale = np.maximum(np.abs(vals).max(axis=-1, keepdims=True), 1.0)
    if np.any(vals < -1e-10 * scale):
        raise ValueError("correlation matrix is not positive semi-definite")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))


def correlation_sqrt(R):
    """Hermitian square roots of a stack of PSD matrices (``None`` passes through)."""
    return None if R is None else _psd_sqrt(R)


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(beta, R_sqrt, N: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``h_k = B_k^{1/2} g_k`` for every UE; returns an (L*N, K) matrix."""
    beta = np.asarray(beta, dtype=float)
    K, L = beta.shape
    w = _cn(rng, (K, L, N))
    g = w if R_sqrt is None else np.einsum("klij,klj->kli", R_sqrt, w)
    h = np.sqrt(beta)[:, :, None] * g
    return h.reshape(K, L * N).T.copy()


def draw_channel(beta_row, R_rows, rng: np.random.Generator) -> np.ndarray:
    """Single-UE draw. ``R_rows`` is a list of L (N, N) matrices."""
    beta_row = np.asarray(beta_row, dtype=float)
    R = np.asarray(R_rows, dtype=complex)
    if R.ndim == 2:
        R = R[None]
    N = R.shape[-1]
    return draw_channels(beta_row[None, :], _psd_sqrt(R)[None], N, rng)[:, 0]


# ---------------------------------------------------------------------------
# Pilots and estimation


def assign_pilots(num_pilots: int, beta) -> np.ndarray:
    """Pilot index per UE.

    With ``K <= num_pilots`` UE k gets pilot k. Otherwise UEs are visited in
    decreasing order of their strongest gain; each takes a least-loaded pilot,
    preferring pilots with no co-pilot UE sharing its strongest RRU and then
    the smallest co-pilot gain at that RRU.
    """
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[0]
    if K <= num_pilots:
        return np.arange(K)
    master = np.argmax(beta, axis=1)
    order = np.argsort(-beta.max(axis=1), kind="stable")
    pilots = np.full(K, -1)
    load = np.zeros(num_pilots, dtype=int)
    for k in order:
        l = master[k]
        best = None
        for t in range(num_pilots):
            users = np.flatnonzero(pilots == t)
            clash = bool(np.any(master[users] == l))
            key = (load[t], clash, float(beta[users, l].sum()), t)
            if best is None or key < best:
                best = key
        t = best[3]
        pilots[k] = t
        load[t] += 1
    return pilots


def estimate_channels(H, beta, R, pilots, p, N: int, rng: np.random.Generator,
                      num_pilots: int, sigma2: float = 1.0) -> np.ndarray:
    """Per-RRU LMMSE estimates from orthogonal length-``num_pilots`` pilot sequences.

    Pilot power equals data power. ``R`` is the (K, L, N, N) correlation stack
    or ``None`` for IID antennas.
    """
    H = np.asarray(H)
    beta = np.asarray(beta, dtype=float)
    K, L = beta.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    tau = float(num_pilots)
    T = int(pilots.max()) + 1
    onehot = np.zeros((K, T))
    onehot[np.arange(K), pilots] = 1.0
    h = H.T.reshape(K, L, N)
    amp = np.sqrt(p * tau)
    noise = np.sqrt(sigma2) * _cn(rng, (T, L, N))
    y = np.einsum("kt,k,kli->tli", onehot, amp, h) + noise
    load = p[:, None] * tau * beta  # (K, L)
    if R is None:
        psi = np.einsum("kt,kl->tl", onehot, load) + sigma2
        h_hat = (amp[:, None] * beta / psi[pilots])[:, :, None] * y[pilots]
    else:
        eye = np.eye(N)
        psi = np.einsum("kt,kl,klij->tlij", onehot, load, R) + sigma2 * eye
        z = np.linalg.solve(psi, y[..., None])[..., 0]  # (T, L, N)
        h_hat = (amp[:, None] * beta)[:, :, None] * np.einsum("klij,klj->kli", R, z[pilots])
    return h_hat.reshape(K, L * N).T.copy()


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    H: np.ndarray  # true channel, (L*N, K)
    H_hat: np.ndarray  # estimate used for combining (equals H under perfect CSI)
    N: int

    def edu_view(self, rows):
        return self.H[rows], self.H_hat[rows]


def antenna_rows(rru_indices, N: int) -> np.ndarray:
    """Row indices of the stacked channel for a set of RRUs."""
    rru = np.asarray(rru_indices, dtype=int)
    return (rru[:, None] * N + np.arange(N)[None, :]).ravel()


# ---------------------------------------------------------------------------
# Binary realization dump: magic, version, ndim (uint32), dims (uint64), then
# row-major (real, imag) float64 pairs, all little-endian.

_MAGIC = b"CFRH"
_VERSION = 1


def save_realization(path, H) -> None:
    H = np.ascontiguousarray(H, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, H.ndim))
        fh.write(struct.pack(f"<{H.ndim}Q", *H.shape))
        fh.write(H.astype("<c16").tobytes(order="C"))


def load_realization(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a realization file")
        version, ndim = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported realization file version {version}")
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape(shape).astype(np.complex128)
