"""Transmit precoders for a fixed IRS configuration.

``update_w_maxmin`` balances all downlink SINRs at the highest common level
under a total power budget, using uplink-downlink duality:

1. normalized fixed point on the dual uplink powers with MMSE receivers,
2. unit-norm MMSE filters as downlink beam directions,
3. downlink powers from the extended coupling matrix of the beams, whose
   Perron eigenvector equalizes all SINRs and meets the budget exactly.

The routines broadcast over leading batch axes of ``h`` so that many
configurations can be balanced in one call (used by the exhaustive search).
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .sinr import build_phi_all

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Precoder:
    W: np.ndarray
    P: float
    converged: bool = True
    iterations: int = 0
    fallback: str = ""


def effective_channels(x, channels, phi=None):
    """Rows h_u with h_u^H = x^H Phi_u, returned as a (U, M) array.

    ``x`` may carry leading batch axes: (..., N+1) -> (..., U, M).
    """
    if phi is None:
        phi = build_phi_all(channels)
    return np.einsum("unm,...n->...um", np.conj(phi), np.asarray(x))


def downlink_sinr(h, W, sigma2):
    """Per-user SINR for channels h (..., U, M) and precoder W (..., M, U)."""
    G = np.abs(np.conj(h) @ W) ** 2
    sig = np.diagonal(G, axis1=-2, axis2=-1)
    return sig / (G.sum(axis=-1) - sig + sigma2)


def _phase_normalize(W):
    # first nonzero entry of each column made real-positive
    mags = np.abs(W)
    first = np.argmax(mags > 1e-300, axis=-2)
    ref = np.take_along_axis(W, first[..., None, :], axis=-2)
    ph = np.where(np.abs(ref) > 0, ref / np.where(np.abs(ref) > 0, np.abs(ref), 1), 1)
    return W * np.conj(ph)


def _scale_to_power(W, P):
    norm2 = np.sum(np.abs(W) ** 2, axis=(-2, -1), keepdims=True)
    return W * np.sqrt(P / norm2)


def update_w_fallback(h, P, sigma2=None, mode="mrt"):
    """Equal-power MRT or ZF precoder with ||W||_F^2 = P.

    ZF on a rank-deficient channel falls back to MRT and sets ``fallback``.
    ``sigma2`` is accepted for signature symmetry and unused.
    """
    h = np.asarray(h, dtype=complex)
    U, M = h.shape[-2:]
    fallback = ""
    if mode == "zf":
        H = np.swapaxes(h, -1, -2)  # (..., M, U), columns h_u
        if U > M or np.any(np.linalg.matrix_rank(H) < U):
            mode, fallback = "mrt", "zf_rank_deficient"
        else:
            W = H @ np.linalg.inv(np.conj(np.swapaxes(H, -1, -2)) @ H)
    if mode == "mrt":
        W = np.swapaxes(h, -1, -2).copy()
    elif mode != "zf":
        raise ValueError(f"unknown fallback mode {mode!r}")
    norms = np.linalg.norm(W, axis=-2, keepdims=True)
    W = np.where(norms > 0, W / np.where(norms > 0, norms, 1), 0) * np.sqrt(P / U)
    return Precoder(W=_phase_normalize(W), P=float(P), fallback=fallback)


def _dual_uplink(ht, P, tol, max_iter):
    """Normalized power fixed point for the dual uplink (noise normalized to 1).

    Returns the powers, R^{-1} h_u for each user and the iteration count.
    """
    batch = ht.shape[:-2]
    U, M = ht.shape[-2:]
    eye = np.eye(M)
    q = np.full(batch + (U,), P / U)
    htT = np.swapaxes(ht, -1, -2)  # (..., M, U)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        R = eye + (htT * q[..., None, :]) @ np.conj(np.swapaxes(htT, -1, -2))
        Rinv_h = np.linalg.solve(R, htT)  # (..., M, U)
        a = np.real(np.sum(np.conj(htT) * Rinv_h, axis=-2))
        # h^H R_{-u}^{-1} h by Sherman-Morrison
        t = a / (1.0 - q * a)
        ul = q * t
        spread = (ul.max(axis=-1) - ul.min(axis=-1)) / ul.max(axis=-1)
        if np.all(spread < tol):
            converged = True
            break
        q = 1.0 / t
        q = q * (P / q.sum(axis=-1, keepdims=True))
    return q, Rinv_h, it, converged


def _balanced_downlink_powers(ht, V, P):
    """Powers equalizing downlink SINRs of unit beams V at the largest level.

    Perron eigenvector of the extended coupling matrix
    [[D Psi, D 1], [1^T D Psi / P, 1^T D 1 / P]], D = diag(1/G_uu).
    """
    G = np.abs(np.conj(ht) @ V) ** 2
    U = G.shape[-1]
    gd = np.diagonal(G, axis1=-2, axis2=-1)
    Dpsi = (G - G * np.eye(U)) / gd[..., :, None]
    top = np.concatenate([Dpsi, (1.0 / gd)[..., :, None]], axis=-1)
    bottom = np.concatenate([Dpsi.sum(axis=-2), (1.0 / gd).sum(axis=-1, keepdims=True)], axis=-1) / P
    ext = np.concatenate([top, bottom[..., None, :]], axis=-2)
    vals, vecs = np.linalg.eig(ext)
    k = np.argmax(vals.real, axis=-1)
    vec = np.take_along_axis(vecs, k[..., None, None], axis=-1)[..., 0].real
    p = vec[..., :U] / vec[..., U:]
    return np.maximum(p, 0.0), 1.0 / np.take_along_axis(vals.real, k[..., None], axis=-1)[..., 0]


def update_w_maxmin(h, P, sigma2, tol=1e-6, max_iter=500):
    """Max-min SINR precoder under ||W||_F^2 <= P by SINR balancing.

    Parameters
    ----------
    h : (..., U, M) complex
        Effective channels (rows h_u, with received amplitude h_u^H w).
    P : float
        Total power budget (linear).
    sigma2 : float or (U,) array
        Noise powers (linear).

    Returns
    -------
    Precoder
        ``converged`` is False when the uplink fixed point hit ``max_iter``;
        the last iterate is returned in that case.
    """
    if P <= 0:
        raise ValueError("P must be positive")
    h = np.asarray(h, dtype=complex)
    U, M = h.shape[-2:]
    if U > M:
        warnings.warn(f"U={U} users exceed M={M} antennas; balanced SINR will be low")
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), h.shape[:-1])
    norms = np.linalg.norm(h, axis=-1)
    if np.any(norms == 0):
        logger.debug("zero effective channel; balanced level is 0, using MRT")
        pre = update_w_fallback(h, P, mode="mrt")
        return Precoder(W=pre.W, P=float(P), converged=False, fallback="zero_channel")
    ht = h / np.sqrt(sigma2)[..., None]
    if U == 1:
        W = np.swapaxes(h, -1, -2) / norms[..., None, :] * np.sqrt(P)
        return Precoder(W=_phase_normalize(W), P=float(P))
    _, Rinv_h, it, converged = _dual_uplink(ht, P, tol, max_iter)
    V = Rinv_h / np.linalg.norm(Rinv_h, axis=-2, keepdims=True)
    p, _ = _balanced_downlink_powers(ht, V, P)
    W = V * np.sqrt(p)[..., None, :]
    # guard against drift from the eigen-solve
    W = _scale_to_power(W, P)
    if not converged:
        logger.debug("SINR balancing stopped after %d iterations", it)
    return Precoder(W=_phase_normalize(W), P=float(P), converged=converged, iterations=it)


def balanced_sinr(h, P, sigma2, **kw):
    """Balanced min-SINR level reached by :func:`update_w_maxmin`."""
    pre = update_w_maxmin(h, P, sigma2, **kw)
    return downlink_sinr(h, pre.W, sigma2).min(axis=-1), pre
