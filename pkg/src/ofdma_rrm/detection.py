"""
MRC / LMMSE receive detectors and post-detection SINR for 1- and 2-stream
transmission on 2 receive antennas.

Everything broadcasts over leading batch axes: a channel vector is
``(..., 2)``, a channel matrix or covariance ``(..., 2, 2)``. Transmit powers
are already multiplied by the power-mask fraction (``sigma_x2 * sigma_c2``).
"""

from __future__ import annotations

import numpy as np
from numpy.linalg import LinAlgError


def hermitian(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def inv2(a: np.ndarray) -> np.ndarray:
    """Closed-form inverse of a batch of 2x2 matrices."""
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    if np.any(det == 0):
        raise LinAlgError("singular 2x2 covariance")
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out / det[..., None, None]


def noise_cov(variance, n_rx: int = 2) -> np.ndarray:
    """Diagonal thermal-noise covariance with per-antenna ``variance``."""
    v = np.asarray(variance, dtype=float)
    if np.any(v <= 0):
        raise ValueError("noise variance must be positive")
    return v[..., None, None] * np.eye(n_rx)


def interference_cov(powers, gains, channels) -> np.ndarray:
    """
    Aggregate inter-cell interference covariance ``sum_j P_j g_j H_j D_j H_j^H``.

    ``channels`` is ``(J, 2)`` for single-antenna interferers or ``(J, 2, T)``
    for ``T`` transmit antennas sharing the interferer's power equally.
    """
    h = np.asarray(channels, dtype=complex)
    pg = np.asarray(powers, dtype=float) * np.asarray(gains, dtype=float)
    if h.size == 0:
        return np.zeros((2, 2), dtype=complex)
    if h.ndim == 2:
        h = h[..., None]
    share = pg / h.shape[-1]
    return np.einsum("j,jat,jbt->ab", share, h, np.conj(h))


def _total_cov(sigma_n, sigma_z):
    sn = np.asarray(sigma_n)
    if sn.ndim == 0:
        sn = noise_cov(sn)
    return sn + np.asarray(sigma_z)


def _quad(w, a):
    """Real part of w^H A w for batched vectors w (..., 2)."""
    return np.real(np.einsum("...a,...ab,...b->...", np.conj(w), a, w))


def mrc_weights(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    norm2 = np.sum(np.abs(h) ** 2, axis=-1)
    if np.any(norm2 == 0):
        raise ValueError("MRC needs a nonzero channel")
    return h / norm2[..., None]


def lmmse_single(h, signal_power, sigma_n, sigma_z) -> np.ndarray:
    """Single-stream LMMSE weights ``s (s h h^H + Sn + Sz)^-1 h``."""
    h = np.asarray(h, dtype=complex)
    s = np.asarray(signal_power, dtype=float)
    cov = s[..., None, None] * h[..., :, None] * np.conj(h[..., None, :]) + _total_cov(sigma_n, sigma_z)
    return s[..., None] * np.einsum("...ab,...b->...a", inv2(cov), h)


def sinr_single(w, h, signal_power, sigma_n, sigma_z) -> np.ndarray:
    """Post-detection SINR ``|w^H h|^2 s / (w^H Sn w + w^H Sz w)``."""
    w = np.asarray(w, dtype=complex)
    h = np.asarray(h, dtype=complex)
    sn = np.asarray(sigma_n)
    if sn.ndim == 0:
        sn = noise_cov(sn)
    num = np.abs(np.sum(np.conj(w) * h, axis=-1)) ** 2 * np.asarray(signal_power, dtype=float)
    den = _quad(w, sn) + _quad(w, np.asarray(sigma_z))
    if np.any(den <= 0):
        raise ValueError("zero noise-plus-interference power")
    return num / den


def lmmse_dual(H, stream_powers, sigma_n, sigma_z) -> np.ndarray:
    """
    Dual-stream LMMSE detector ``Sx H^H (H Sx H^H + Sn + Sz)^-1``.

    ``stream_powers`` holds the diagonal of ``Sx`` as ``(..., 2)``. Row ``s``
    of the result is ``w_s^H``.
    """
    H = np.asarray(H, dtype=complex)
    px = np.asarray(stream_powers, dtype=float)
    HS = H * px[..., None, :]
    cov = HS @ hermitian(H) + _total_cov(sigma_n, sigma_z)
    return px[..., :, None] * (hermitian(H) @ inv2(cov))


def sinr_dual(W, H, stream_powers, sigma_n, sigma_z) -> np.ndarray:
    """Per-stream SINRs ``(..., 2)`` of a dual-stream detector ``W``."""
    W = np.asarray(W, dtype=complex)
    H = np.asarray(H, dtype=complex)
    px = np.asarray(stream_powers, dtype=float)
    sn = np.asarray(sigma_n)
    if sn.ndim == 0:
        sn = noise_cov(sn)
    G = np.abs(W @ H) ** 2 * px[..., None, :]      # G[s, t] = |w_s^H h_t|^2 p_t
    w = np.conj(W)                                  # row s is w_s
    noise = _quad(w, sn[..., None, :, :]) + _quad(w, np.asarray(sigma_z)[..., None, :, :])
    signal = np.diagonal(G, axis1=-2, axis2=-1)
    den = G.sum(axis=-1) - signal + noise
    if np.any(den <= 0):
        raise ValueError("zero noise-plus-interference power")
    return signal / den


def sinr_mu(channels, stream_powers, noise_covs, interf_covs):
    """
    Multi-user dual-stream SINRs for a UE pair.

    Stream 0 belongs to the first UE and stream 1 to the second; each UE runs
    its own dual-stream LMMSE on its own channel and covariances and keeps
    only its stream.
    """
    out = []
    for stream, (H, sn, sz) in enumerate(zip(channels, noise_covs, interf_covs)):
        W = lmmse_dual(H, stream_powers, sn, sz)
        out.append(sinr_dual(W, H, stream_powers, sn, sz)[..., stream])
    return tuple(out)
