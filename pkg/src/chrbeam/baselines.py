"""Comparison algorithms for the discrete phase design.

* ``gda`` -- plain projected gradient descent-ascent on the hull minimax
  problem with no penalty, then rounding.  It is the CHR-APGDA loop with the
  proximal map replaced by the hull projection, i.e. a penalty ablation.
* ``unit_circle`` -- Riemannian gradient ascent over the product of unit
  circles on a log-sum-exp smoothed min, then rounding.  A simplified
  stand-in for Riemannian designs from the literature, not a reproduction.
* ``random`` -- best of a number of random alphabet configurations.
* ``exhaustive`` -- global optimum by enumerating all K**N configurations.

The ``solve_*`` functions taking couplings work at a fixed precoder; the
``run_*`` functions wrap them in the same precoder alternation CHR-APGDA
uses, so comparisons share everything but the x-update.
"""
import time
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import geometry
from .precoder import downlink_sinr, effective_channels, update_w_maxmin
from .sinr import build_phi_all, grad_x_g, sinr_all
from .solver import (SolveTrace, SolverConfig, TrialResult, alternate, initial_x,
                     outer_stepsizes, to_db)

ALGORITHMS = ("unit_circle", "gda", "random", "exhaustive")

EXHAUSTIVE_LIMIT = 2 ** 20


@dataclass
class BaselineConfig:
    algorithm: str = "gda"
    T1: int = 10
    T2: int = 1000
    alpha0: float = 0.01
    beta0: float = 0.01
    stepsize_decay: float = 0.997
    x_step: str = "max"
    w_refresh_period: int = 10
    init: str = "center"
    # smoothing temperature = scale * initial min_u f_u, halved every period
    temperature_scale: float = 0.01
    temperature_period: int = 200
    draws: int = 100
    # exhaustive search: evaluate every configuration with this fixed W
    exhaustive_shared_w: bool = False
    exhaustive_chunk: int = 4096
    precoder_tol: float = 1e-6
    precoder_max_iter: int = 500

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown baseline {self.algorithm!r}")
        if self.T1 < 1 or self.T2 < 0 or self.draws < 1 or self.temperature_period < 1:
            raise ValueError("iteration counts must be positive")
        if self.temperature_scale <= 0:
            raise ValueError("temperature_scale must be positive")

    def to_dict(self):
        return asdict(self)

    def solver_config(self, **kw):
        """Equivalent :class:`SolverConfig` for the shared outer loop."""
        return SolverConfig(T1=self.T1, T2=self.T2, alpha0=self.alpha0, beta0=self.beta0,
                            stepsize_decay=self.stepsize_decay, x_step=self.x_step,
                            w_refresh_period=self.w_refresh_period, init=self.init,
                            precoder_tol=self.precoder_tol,
                            precoder_max_iter=self.precoder_max_iter, **kw)


def _x_stepsize(grad, beta, mode):
    if mode == "max":
        gmax = np.abs(grad).max()
        if gmax > 0:
            return beta / gmax
    return beta


def gda_inner(cp, x0, y0, cfg, K, trace=None, outer=0, refresh=None):
    """Projected GDA: simplex descent on y, hull-projected ascent on x."""
    polygon = geometry.build_polygon(K)
    x = np.array(x0, dtype=complex)
    y = np.asarray(y0, dtype=float).copy()
    alpha, beta = cfg.alpha0, cfg.beta0
    period = cfg.w_refresh_period
    for j in range(1, cfg.T2 + 1):
        if refresh is not None and period and j > 1 and (j - 1) % period == 0:
            cp = refresh(x)
        y = geometry.project_simplex(y - alpha * sinr_all(x, cp))
        grad = grad_x_g(x, y, cp)[1:]
        bx = _x_stepsize(grad, beta, cfg.x_step)
        x[1:] = geometry.project_hull(x[1:] + bx * grad, polygon)
        if trace is not None:
            trace.record(outer, j, x, y, cp, 0.0, alpha, beta)
        alpha *= cfg.stepsize_decay
        beta *= cfg.stepsize_decay
    return x, y


def smooth_min(f, tau):
    """Log-sum-exp lower approximation -tau log sum exp(-f / tau) of min(f)."""
    f = np.asarray(f, dtype=float)
    m = f.min()
    return m - tau * np.log(np.sum(np.exp(-(f - m) / tau)))


def smooth_min_weights(f, tau):
    z = -(np.asarray(f) - np.min(f)) / tau
    w = np.exp(z)
    return w / w.sum()


def unit_circle_inner(cp, x0, cfg, K, trace=None, outer=0, refresh=None):
    """Riemannian ascent of the smoothed min over |x_n| = 1.

    Euclidean gradient -> tangent projection -> step -> retraction
    x_n / |x_n|.  Entry 0 stays pinned at 1.
    """
    x = np.array(x0, dtype=complex)
    x[1:] = np.where(np.abs(x[1:]) > 0, x[1:] / np.where(np.abs(x[1:]) > 0, np.abs(x[1:]), 1), 1)
    tau = cfg.temperature_scale * sinr_all(x, cp).min()
    beta = cfg.beta0
    period = cfg.w_refresh_period
    for j in range(1, cfg.T2 + 1):
        if refresh is not None and period and j > 1 and (j - 1) % period == 0:
            cp = refresh(x)
        if j > 1 and (j - 1) % cfg.temperature_period == 0:
            tau *= 0.5
        f = sinr_all(x, cp)
        w = smooth_min_weights(f, tau) if tau > 0 else (f == f.min()) / np.sum(f == f.min())
        egrad = grad_x_g(x, w, cp)[1:]
        z = x[1:]
        rgrad = egrad - np.real(egrad * np.conj(z)) * z
        bx = _x_stepsize(rgrad, beta, cfg.x_step)
        z = z + bx * rgrad
        x[1:] = z / np.abs(z)
        if trace is not None:
            trace.record(outer, j, x, w, cp, 0.0, 0.0, beta)
        beta *= cfg.stepsize_decay
    return x


def _fixed_w_result(name, x, cp, K, t0, iters, flags=None):
    alphabet = geometry.build_alphabet(K)
    polygon = geometry.hull_of(alphabet)
    on_vertices = bool(np.all(geometry.distance_to_alphabet(x[1:], polygon) <= 1e-6))
    x = x.copy()
    x[1:] = geometry.round_to_alphabet(x[1:], alphabet)
    f = sinr_all(x, cp)
    return TrialResult(algorithm=name, min_sinr=float(f.min()), per_user_sinr=f, x=x, W=None,
                       inner_iterations=iters, runtime_s=time.perf_counter() - t0,
                       converged_to_vertices=on_vertices, flags=flags or {})


def solve_gda(cp, cfg, K, x0=None, trace=None):
    """GDA ablation at a fixed precoder; min-SINR reported after rounding."""
    t0 = time.perf_counter()
    N, U = cp.dim - 1, cp.U
    x0 = initial_x(N, K, cfg.init) if x0 is None else x0
    x, _ = gda_inner(cp, x0, np.full(U, 1.0 / U), cfg, K, trace=trace)
    return _fixed_w_result("gda", x, cp, K, t0, cfg.T2)


def solve_unit_circle(cp, cfg, K, x0=None, trace=None):
    """Smoothed Riemannian unit-circle design at a fixed precoder, then rounding."""
    t0 = time.perf_counter()
    N = cp.dim - 1
    x0 = np.ones(N + 1, dtype=complex) if x0 is None else x0
    x = unit_circle_inner(cp, x0, cfg, K, trace=trace)
    return _fixed_w_result("unit_circle", x, cp, K, t0, cfg.T2)


def run_gda(channels, P, sigma2, K, cfg, rng=None, record_trace=False):
    scfg = cfg.solver_config()
    x0 = initial_x(channels.N, K, cfg.init, rng)
    trace = SolveTrace() if record_trace else None
    U = channels.U

    def inner(cp, x, outer, refresh):
        a0, b0 = outer_stepsizes(scfg, outer)
        run_cfg = replace(cfg, alpha0=a0, beta0=b0)
        x, _ = gda_inner(cp, x, np.full(U, 1.0 / U), run_cfg, K, trace, outer, refresh)
        return x, cfg.T2

    return alternate(channels, P, sigma2, K, scfg, inner, x0, "gda", trace)


def run_unit_circle(channels, P, sigma2, K, cfg, rng=None, record_trace=False):
    # the unit circle excludes the hull center; start from the all-ones phases
    scfg = cfg.solver_config()
    x0 = np.ones(channels.N + 1, dtype=complex)
    trace = SolveTrace() if record_trace else None

    def inner(cp, x, outer, refresh):
        return unit_circle_inner(cp, x, cfg, K, trace, outer, refresh), cfg.T2

    return alternate(channels, P, sigma2, K, scfg, inner, x0, "unit_circle", trace)


def _evaluate_batch(X, channels, P, sigma2, phi, cfg, W=None):
    h = effective_channels(X, channels, phi)
    if W is None:
        pre = update_w_maxmin(h, P, sigma2, tol=cfg.precoder_tol, max_iter=cfg.precoder_max_iter)
        W = pre.W
        converged = pre.converged
    else:
        converged = True
    return downlink_sinr(h, W, sigma2), W, converged


def solve_random(channels, P, sigma2, K, draws, rng, cfg=None):
    """Best of ``draws`` uniformly random alphabet configurations."""
    if draws < 1:
        raise ValueError("draws must be >= 1")
    cfg = cfg or BaselineConfig(algorithm="random")
    t0 = time.perf_counter()
    alphabet = geometry.build_alphabet(K)
    phi = build_phi_all(channels)
    X = np.ones((draws, channels.N + 1), dtype=complex)
    X[:, 1:] = alphabet.points[rng.integers(0, K, size=(draws, channels.N))]
    f, W, converged = _evaluate_batch(X, channels, P, sigma2, phi, cfg)
    i = int(np.argmax(f.min(axis=-1)))
    flags = {} if converged else {"precoder_not_converged": True}
    return TrialResult(algorithm="random", min_sinr=float(f[i].min()), per_user_sinr=f[i],
                       x=X[i], W=W[i], inner_iterations=0, runtime_s=time.perf_counter() - t0,
                       converged_to_vertices=True, flags=flags)


def solve_exhaustive(channels, P, sigma2, K, N=None, U=None, cfg=None, shared_W=None):
    """Global max-min optimum over all K**N configurations.

    Each configuration gets its own max-min precoder unless ``shared_W`` is
    given, in which case every configuration is scored with that W (flagged
    in the result).  Ties go to the lexicographically smallest configuration
    index (digits = alphabet indices, x_1 most significant).
    """
    N = channels.N if N is None else N
    U = channels.U if U is None else U
    if (N, U) != (channels.N, channels.U):
        raise ValueError("N, U do not match the channel set")
    total = K ** N
    if total > EXHAUSTIVE_LIMIT:
        raise ValueError(f"search space K**N = {K}**{N} exceeds the limit 2**20")
    cfg = cfg or BaselineConfig(algorithm="exhaustive")
    t0 = time.perf_counter()
    alphabet = geometry.build_alphabet(K)
    phi = build_phi_all(channels)
    powers = K ** np.arange(N - 1, -1, -1)
    best_val, best = -np.inf, None
    converged = True
    for start in range(0, total, cfg.exhaustive_chunk):
        idx = np.arange(start, min(total, start + cfg.exhaustive_chunk))
        digits = (idx[:, None] // powers) % K
        X = np.ones((idx.size, N + 1), dtype=complex)
        X[:, 1:] = alphabet.points[digits]
        f, W, ok = _evaluate_batch(X, channels, P, sigma2, phi, cfg, shared_W)
        converged &= ok
        m = f.min(axis=-1)
        i = int(np.argmax(m))
        if m[i] > best_val:
            best_val = m[i]
            Wi = W if shared_W is not None else W[i]
            best = (X[i], Wi, f[i])
    flags = {"evaluations": total}
    if shared_W is not None:
        flags["shared_w"] = True
    if not converged:
        flags["precoder_not_converged"] = True
    x, W, f = best
    if shared_W is None:
        # re-score the winner alone so the reported numbers do not depend on
        # how the batches were partitioned
        f, W, _ = _evaluate_batch(x[None], channels, P, sigma2, phi, cfg)
        f, W = f[0], W[0]
    return TrialResult(algorithm="exhaustive", min_sinr=float(f.min()), per_user_sinr=f,
                       x=x, W=W, inner_iterations=0, runtime_s=time.perf_counter() - t0,
                       converged_to_vertices=True, flags=flags)
