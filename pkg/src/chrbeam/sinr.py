"""SINR evaluation, the smooth minimax term and its gradients.

The phase vector ``x`` (length N+1, ``x[0] == 1``) is stored exactly as it
enters ``x^H C x``.  Because the hull is closed under conjugation, the
reflection phases are recovered as ``theta_n = -angle(x[n])`` (see
:func:`phases_from_x`).

Every coupling matrix is rank one, ``C[u][u'] = b b^H`` with
``b = Phi_u w_{u'}``, so the module keeps the vectors ``b`` and only builds
the dense matrices on request.
"""
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CouplingMatrices:
    """Rank-one couplings ``C[u][u'] = vecs[u, u'] vecs[u, u']^H`` plus noise powers."""

    vecs: np.ndarray  # (U, U, N+1)
    sigma2: np.ndarray  # (U,)

    def __post_init__(self):
        if np.any(np.asarray(self.sigma2) <= 0):
            raise ValueError("noise powers must be positive")

    @property
    def U(self):
        return self.vecs.shape[0]

    @property
    def dim(self):
        return self.vecs.shape[-1]

    @property
    def C(self):
        """Dense (U, U, N+1, N+1) array of coupling matrices."""
        b = self.vecs
        return b[..., :, None] * np.conj(b[..., None, :])

    def scaled(self, c):
        """Couplings for W scaled by sqrt(c) and noise scaled by c."""
        return CouplingMatrices(self.vecs * np.sqrt(c), self.sigma2 * c)


@dataclass(frozen=True)
class LipschitzBounds:
    L: np.ndarray
    lambda_boundary: float
    lambda_equiv: float


def build_phi(channels, u):
    """(N+1) x M matrix stacking d_u^T over diag(g_u) F."""
    if not 0 <= u < channels.U:
        raise IndexError(f"user index {u} out of range for U={channels.U}")
    return np.vstack([channels.d[u][None, :], channels.g[u][:, None] * channels.F])


def build_phi_all(channels):
    """All Phi_u stacked into a (U, N+1, M) array."""
    refl = channels.g[:, :, None] * channels.F[None, :, :]
    return np.concatenate([channels.d[:, None, :], refl], axis=1)


def build_couplings(channels, W, sigma2, P=None, phi=None):
    W = np.asarray(W, dtype=complex)
    if W.shape != (channels.M, channels.U):
        raise ValueError(f"W has shape {W.shape}, expected {(channels.M, channels.U)}")
    if P is not None:
        power = np.linalg.norm(W) ** 2
        if power > P * (1 + 1e-6):
            warnings.warn(f"precoder power {power:.6g} exceeds budget {P:.6g}")
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (channels.U,)).copy()
    if phi is None:
        phi = build_phi_all(channels)
    vecs = np.einsum("unm,mv->uvn", phi, W)
    return CouplingMatrices(vecs=vecs, sigma2=sigma2)


def _inner(x, cp):
    # s[u, u'] = x^H b_{uu'}
    return cp.vecs @ np.conj(x)


def sinr_all(x, cp):
    """Per-user SINRs f_1(x), ..., f_U(x)."""
    s = _inner(np.asarray(x), cp)
    p = np.abs(s) ** 2
    sig = np.diagonal(p)
    return sig / (p.sum(axis=1) - sig + cp.sigma2)


def sinr_u(x, cp, u):
    return sinr_all(x, cp)[u]


def sinr_all_dense(x, cp):
    """Same as :func:`sinr_all` through explicit quadratic forms (slow path)."""
    x = np.asarray(x)
    q = np.real(np.einsum("i,uvij,j->uv", np.conj(x), cp.C, x))
    sig = np.diagonal(q)
    return sig / (q.sum(axis=1) - sig + cp.sigma2)


def min_sinr(x, cp):
    return float(sinr_all(x, cp).min())


def g_value(x, y, cp):
    return float(np.dot(y, sinr_all(x, cp)))


def grad_y_g(x, cp):
    return sinr_all(x, cp)


def grad_x_g(x, y, cp):
    """Ascent direction 2 dg/d(conj x) of g(x, y) = sum_u y_u f_u(x).

    Entry 0 is returned for completeness; callers keep x[0] pinned.
    """
    x = np.asarray(x)
    s = _inner(x, cp)
    p = np.abs(s) ** 2
    q = np.diagonal(p)
    D = p.sum(axis=1) - q + cp.sigma2
    # coefficient of b_{uu'} conj(s_{uu'}) in the gradient
    y = np.asarray(y)
    coef = np.repeat(-2.0 * (y * q / D ** 2)[:, None], len(y), axis=1)
    np.fill_diagonal(coef, 2.0 * y / D)
    w = coef * np.conj(s)
    return w.ravel() @ cp.vecs.reshape(-1, cp.vecs.shape[-1])


def lipschitz_bounds(cp, K):
    """Per-user Lipschitz constants of f_u over the hull and the penalty thresholds."""
    b = cp.vecs
    U, n1 = cp.U, cp.dim
    L = np.empty(U)
    for u in range(U):
        c_uu = np.linalg.norm(b[u, u]) ** 2
        others = np.delete(b[u], u, axis=0)
        gram = np.conj(others) @ others.T
        interf = np.sqrt(np.sum(np.abs(gram) ** 2))
        s2 = cp.sigma2[u]
        L[u] = 2.0 * np.sqrt(n1) * c_uu / s2 * (1.0 + n1 * interf / s2)
    lam_b = float(L.max()) if U else 0.0
    mult = np.sin(np.pi / K) / (1.0 - np.cos(np.pi / K))
    return LipschitzBounds(L=L, lambda_boundary=lam_b, lambda_equiv=float(mult * lam_b))


def phases_from_x(x):
    """Reflection phases theta_n in [0, 2 pi) for entries 1..N."""
    return np.mod(-np.angle(np.asarray(x)[1:]), 2 * np.pi)
