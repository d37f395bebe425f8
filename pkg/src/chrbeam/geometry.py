"""Discrete phase alphabet, its convex hull and the projection/proximal maps.

The hull of the K-th roots of unity is a regular K-gon with apothem
cos(pi/K).  For K = 2 it degenerates to the real segment [-1, 1]; every
routine below handles that case explicitly.

All functions accept scalars or numpy arrays of complex numbers and operate
elementwise.
"""
from dataclasses import dataclass, field

import numpy as np

# safeguarded Newton iterations per monotone piece of the edge subproblem
_NEWTON_ITERS = 60
_EDGE_TOL = 1e-10


@dataclass(frozen=True)
class PhaseAlphabet:
    """The K unit-modulus phase levels exp(j 2 pi k / K), sorted by angle."""

    K: int
    points: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class HullPolygon:
    """Convex hull of a :class:`PhaseAlphabet` (regular K-gon)."""

    K: int
    apothem: float
    vertices: np.ndarray = field(repr=False)

    @property
    def half_edge(self):
        return np.sin(np.pi / self.K)


def build_alphabet(K):
    if int(K) != K or K < 2:
        raise ValueError(f"K must be an integer >= 2, got {K!r}")
    K = int(K)
    points = np.exp(2j * np.pi * np.arange(K) / K)
    # snap the exactly representable levels so +-1, +-j are exact
    points = np.round(points.real, 15) + 1j * np.round(points.imag, 15)
    return PhaseAlphabet(K=K, points=points)


def hull_of(alphabet):
    K = alphabet.K
    return HullPolygon(K=K, apothem=float(np.cos(np.pi / K)), vertices=alphabet.points)


def build_polygon(K):
    return hull_of(build_alphabet(K))


def round_to_alphabet(z, alphabet, return_index=False):
    """Nearest alphabet point; ties go to the lowest index (z = 0 -> index 0)."""
    z = np.asarray(z, dtype=complex)
    dist = np.abs(z[..., None] - alphabet.points)
    # ties within rounding noise count as ties
    best = dist.min(axis=-1, keepdims=True)
    idx = np.argmax(dist <= best + 1e-12, axis=-1)
    out = alphabet.points[idx]
    if return_index:
        return out, idx
    return out


def _edge_frame(polygon):
    """Outward unit normals (as complex numbers) of the K edges.

    Edge k joins vertex k and vertex k+1; its outward normal points at angle
    (2k+1) pi / K.
    """
    K = polygon.K
    return np.exp(1j * np.pi * (2 * np.arange(K) + 1) / K)


def signed_edge_distances(z, polygon):
    """Signed distance of z to each edge's supporting line (positive = outside)."""
    z = np.asarray(z, dtype=complex)
    normals = _edge_frame(polygon)
    return np.real(z[..., None] * np.conj(normals)) - polygon.apothem


def in_hull(z, polygon, tol=1e-9):
    z = np.asarray(z, dtype=complex)
    if polygon.K == 2:
        return (np.abs(z.imag) <= tol) & (np.abs(z.real) <= 1 + tol)
    return np.all(signed_edge_distances(z, polygon) <= tol, axis=-1)


def distance_to_boundary(z, polygon):
    """Distance from hull points to the hull boundary.

    For K = 2 the hull is a segment and its (relative) boundary is {-1, +1}.
    """
    z = np.asarray(z, dtype=complex)
    if polygon.K == 2:
        return np.minimum(np.abs(z - 1), np.abs(z + 1))
    return np.abs(signed_edge_distances(z, polygon)).min(axis=-1)


def distance_to_alphabet(z, polygon):
    z = np.asarray(z, dtype=complex)
    return np.abs(z[..., None] - polygon.vertices).min(axis=-1)


def _segment_project(z, a, b):
    e = b - a
    t = np.clip(np.real((z - a) * np.conj(e)) / np.abs(e) ** 2, 0.0, 1.0)
    return a + t * e


def project_hull(z, polygon):
    """Euclidean projection onto the K-gon (elementwise).

    A point outside the polygon projects onto the edge of its own angular
    sector (the sector is a convex cone containing both the edge and its
    outward normal), so each point is rotated into sector 0, clipped against
    the single edge [1, e^{j 2 pi / K}] and rotated back.
    """
    z = np.asarray(z, dtype=complex)
    if polygon.K == 2:
        return np.clip(z.real, -1.0, 1.0) + 0j
    K = polygon.K
    width = 2.0 * np.pi / K
    k = np.floor(np.mod(np.angle(z), 2.0 * np.pi) / width)
    rot = np.exp(1j * width * k)
    w = z * np.conj(rot)
    normal = np.exp(1j * np.pi / K)
    outside = np.real(w * np.conj(normal)) > polygon.apothem
    proj = _segment_project(w, 1.0 + 0j, polygon.vertices[1]) * rot
    return np.where(outside, proj, z)


def prox_objective(x, c, beta, lam):
    """phi(x) = |x - c|^2 / (2 beta) - lam |x|."""
    return np.abs(x - c) ** 2 / (2.0 * beta) - lam * np.abs(x)


def _prox_segment_k2(c, beta, lam):
    # hull is [-1, 1]; phi(s) = ((s - cr)^2 + ci^2)/(2 beta) - lam |s|
    cr = np.real(c)
    cand = np.stack([
        np.clip(cr + beta * lam, 0.0, 1.0),
        np.clip(cr - beta * lam, -1.0, 0.0),
    ], axis=-1)
    phi = prox_objective(cand + 0j, c[..., None], beta, lam)
    k = np.argmin(phi, axis=-1)
    return np.take_along_axis(cand, k[..., None], axis=-1)[..., 0] + 0j


def _edge_minimizers(cs, ch, h, half, beta, lam):
    """Minimize q(s) = ((s-cs)^2 + (h-ch)^2)/(2 beta) - lam sqrt(h^2 + s^2) on [-half, half].

    q'' = 1/beta - lam h^2 / (h^2+s^2)^{3/2} changes sign at most twice, at
    s = +-r with r^2 = (lam beta h^2)^{2/3} - h^2, so q' is monotone on each
    of at most three pieces.  Each piece with a sign change of q' holds one
    stationary point, found by Newton's method safeguarded with bisection.
    Returns an array (..., P) of candidate s values including both endpoints.
    """
    r2 = np.cbrt(lam * beta * h * h) ** 2 - h * h
    r = np.sqrt(np.maximum(r2, 0.0))
    r = np.minimum(r, half)
    breaks = np.stack([-half * np.ones_like(r), -r, r, half * np.ones_like(r)], axis=-1)

    def dq(s):
        return (s - cs[..., None]) / beta - lam * s / np.sqrt(h * h + s * s)

    flo = dq(breaks[..., :-1])
    fhi = dq(breaks[..., 1:])
    shape = flo.shape
    lo = np.broadcast_to(breaks[..., :-1], shape)
    hi = np.broadcast_to(breaks[..., 1:], shape)
    has_root = (flo * fhi < 0) & (hi > lo)
    s = np.full(shape, -half)
    idx = np.nonzero(has_root)
    if idx[0].size:
        cs_r = np.broadcast_to(cs[..., None], shape)[idx]
        # orient so that dq(a) < 0 < dq(b)
        swap = flo[idx] > 0
        a = np.where(swap, hi[idx], lo[idx])
        b = np.where(swap, lo[idx], hi[idx])
        s_r = 0.5 * (a + b)
        for _ in range(_NEWTON_ITERS):
            root = np.sqrt(h * h + s_r * s_r)
            f = (s_r - cs_r) / beta - lam * s_r / root
            neg = f < 0
            a = np.where(neg, s_r, a)
            b = np.where(neg, b, s_r)
            d = 1.0 / beta - lam * h * h / root ** 3
            with np.errstate(divide="ignore", invalid="ignore"):
                step = s_r - f / d
            ok = np.isfinite(step) & (step >= np.minimum(a, b)) & (step <= np.maximum(a, b))
            s_new = np.where(ok, step, 0.5 * (a + b))
            done = np.all(np.abs(s_new - s_r) <= _EDGE_TOL * 1e-3)
            s_r = s_new
            if done:
                break
        s[idx] = s_r
    ends = np.stack([-half * np.ones_like(cs), half * np.ones_like(cs)], axis=-1)
    return np.concatenate([s, ends], axis=-1)


def prox_coordinate(c, beta, lam, polygon):
    """Global minimizer over the K-gon of |x - c|^2/(2 beta) - lam |x|.

    Candidates: the interior stationary point c (1 + beta lam / |c|) when it
    is feasible, the stationary points of each edge restriction, and the
    vertices.  Ties go to the lowest candidate index (interior, then edges in
    order).  Elementwise over c.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    c = np.asarray(c, dtype=complex)
    scalar = c.ndim == 0
    c = np.atleast_1d(c)
    if lam == 0:
        out = project_hull(c, polygon)
        return out[0] if scalar else out
    if polygon.K == 2:
        out = _prox_segment_k2(c, beta, lam)
        return out[0] if scalar else out

    K = polygon.K
    h = polygon.apothem
    half = polygon.half_edge
    normals = _edge_frame(polygon)
    tangents = 1j * normals
    # coordinates of c in each edge frame: c = ch * n + cs * t
    rel = c[..., None] * np.conj(normals)
    ch = rel.real
    cs = rel.imag
    s = _edge_minimizers(cs, ch, h, half, beta, lam)
    edge_pts = (h * normals)[..., None] + s * tangents[..., None]
    edge_pts = edge_pts.reshape(c.shape + (-1,))

    mag = np.abs(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        interior = np.where(mag > 0, c * (1.0 + beta * lam / mag), 0j)
    # the interior candidate is only admissible when feasible
    interior_ok = in_hull(interior, polygon, tol=0.0) & (mag > 0)

    cand = np.concatenate([interior[..., None], edge_pts], axis=-1)
    phi = prox_objective(cand, c[..., None], beta, lam)
    phi[..., 0] = np.where(interior_ok, phi[..., 0], np.inf)
    best = phi.min(axis=-1, keepdims=True)
    k = np.argmax(phi <= best + 1e-15 * np.maximum(1.0, np.abs(best)), axis=-1)
    out = np.take_along_axis(cand, k[..., None], axis=-1)[..., 0]
    # candidates already sit on the polygon; clean rounding drift at vertices
    vidx = np.abs(out[..., None] - polygon.vertices)
    snap = vidx.min(axis=-1) < 1e-13
    out = np.where(snap, polygon.vertices[np.argmin(vidx, axis=-1)], out)
    return out[0] if scalar else out


def project_simplex(v):
    """Euclidean projection onto the probability simplex by sort-and-threshold."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("project_simplex needs a nonempty 1-D vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = ind[u - css / ind > 0][-1]
    tau = css[rho - 1] / rho
    y = np.maximum(v - tau, 0.0)
    return y / y.sum()
