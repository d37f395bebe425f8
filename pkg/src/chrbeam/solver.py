"""Alternating projection/proximal gradient descent-ascent with a penalty homotopy.

The inner loop works on the minimax form

    max_x  min_{y in simplex}  sum_u y_u f_u(x) + lam * ||x||_1,   x_n in conv(X)

with a projected descent step on ``y`` and a coordinatewise proximal ascent
step on ``x``.  The outer loop alternates it with the max-min precoder.
"""
import csv
import logging
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import geometry
from .precoder import effective_channels, update_w_maxmin, downlink_sinr
from .sinr import (build_couplings, build_phi_all, grad_x_g, lipschitz_bounds,
                   sinr_all)

logger = logging.getLogger(__name__)


def to_db(v):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(v)


@dataclass
class SolverConfig:
    T1: int = 10
    T2: int = 1000
    lambda_init: float = 1e-4
    lambda_growth: float = 10.0
    lambda_period: int = 100
    alpha0: float = 0.01
    beta0: float = 0.01
    stepsize_decay: float = 0.997
    lambda_cap_mode: str = "none"  # none | equivalence_threshold
    # constant penalty instead of the homotopy (None = use the schedule)
    fixed_lambda: float = None
    final_round: bool = True
    final_w_update: bool = True
    reset_stepsizes: bool = True
    init: str = "center"  # center | ones | random
    # "max": x-stepsize beta / max_n |grad_n| (scale-free); "fixed": beta as is
    x_step: str = "max"
    # re-solve the precoder every this many inner iterations (0 = once per
    # outer iteration only)
    w_refresh_period: int = 10
    precoder_tol: float = 1e-6
    precoder_max_iter: int = 500
    vertex_tol: float = 1e-6
    record_trace: bool = True

    def __post_init__(self):
        if self.T1 < 1 or self.T2 < 0 or self.lambda_period < 1:
            raise ValueError("iteration counts must be positive")
        if not 0 < self.stepsize_decay <= 1:
            raise ValueError("stepsize_decay must lie in (0, 1]")
        if self.lambda_growth <= 1:
            raise ValueError("lambda_growth must exceed 1")
        if self.lambda_cap_mode not in ("none", "equivalence_threshold"):
            raise ValueError(f"unknown lambda_cap_mode {self.lambda_cap_mode!r}")
        if self.w_refresh_period < 0:
            raise ValueError("w_refresh_period must be >= 0")
        if self.x_step not in ("max", "fixed"):
            raise ValueError(f"unknown x_step {self.x_step!r}")
        if self.init not in ("ones", "center", "random"):
            raise ValueError(f"unknown init {self.init!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class SolveTrace:
    """Per-inner-iteration records, concatenated over outer iterations."""

    outer: list = field(default_factory=list)
    iteration: list = field(default_factory=list)
    min_sinr_db: list = field(default_factory=list)
    g: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    # one entry per outer iteration: min-SINR right after the W update
    outer_min_sinr_db: list = field(default_factory=list)
    timestamps: list = field(default_factory=list)

    def record(self, outer, j, x, y, cp, lam, alpha, beta):
        f = sinr_all(x, cp)
        self.outer.append(outer)
        self.iteration.append(j)
        self.min_sinr_db.append(float(to_db(f.min())))
        self.g.append(float(np.dot(y, f)))
        self.lam.append(float(lam))
        self.alpha.append(float(alpha))
        self.beta.append(float(beta))

    def __len__(self):
        return len(self.iteration)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outer", "iteration", "min_sinr_db", "lambda", "alpha", "beta"])
            for row in zip(self.outer, self.iteration, self.min_sinr_db, self.lam,
                           self.alpha, self.beta):
                w.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])


@dataclass
class TrialResult:
    algorithm: str
    min_sinr: float
    per_user_sinr: np.ndarray
    x: np.ndarray
    W: np.ndarray
    inner_iterations: int = 0
    runtime_s: float = 0.0
    converged_to_vertices: bool = False
    trace: SolveTrace = None
    flags: dict = field(default_factory=dict)

    @property
    def min_sinr_db(self):
        return float(to_db(self.min_sinr))

    @property
    def per_user_sinr_db(self):
        return to_db(np.asarray(self.per_user_sinr))


def lambda_schedule(j, cfg, bounds=None):
    """Penalty weight at inner iteration j (1-based)."""
    if cfg.fixed_lambda is not None:
        return float(cfg.fixed_lambda)
    try:
        lam = cfg.lambda_init * cfg.lambda_growth ** (j // cfg.lambda_period)
    except OverflowError:
        lam = np.inf
    if cfg.lambda_cap_mode == "equivalence_threshold" and bounds is not None:
        lam = min(lam, bounds.lambda_equiv)
    return lam


def check_feasible(x, polygon, tol=1e-9):
    x = np.asarray(x)
    if x[0] != 1:
        return False
    return bool(np.all(geometry.in_hull(x[1:], polygon, tol=tol)))


def inner_apgda(cp, x0, y0, cfg, K, bounds=None, trace=None, outer=0, step=None,
                refresh=None):
    """Run ``cfg.T2`` alternating y-descent / x-proximal-ascent iterations.

    ``step`` optionally overrides the x-update map ``(c, beta, lam) -> x``;
    the default is the proximal map of the penalty over the K-gon.
    ``refresh(x) -> CouplingMatrices`` is called every
    ``cfg.w_refresh_period`` iterations when given (precoder re-solve).
    Returns ``(x, y)``; records into ``trace`` when given.
    """
    polygon = geometry.build_polygon(K)
    if not check_feasible(x0, polygon):
        raise ValueError("x0 must have x[0] = 1 and entries inside the hull")
    y0 = np.asarray(y0, dtype=float)
    if np.any(y0 < 0) or abs(y0.sum() - 1) > 1e-10:
        raise ValueError("y0 must lie on the simplex")
    x = np.array(x0, dtype=complex)
    y = y0.copy()
    if cfg.lambda_cap_mode == "equivalence_threshold" and bounds is None:
        bounds = lipschitz_bounds(cp, K)
    if step is None:
        def step(c, beta, lam):
            return geometry.prox_coordinate(c, beta, lam, polygon)
    alpha, beta = cfg.alpha0, cfg.beta0
    period = cfg.w_refresh_period
    for j in range(1, cfg.T2 + 1):
        if refresh is not None and period and j > 1 and (j - 1) % period == 0:
            cp = refresh(x)
        lam = lambda_schedule(j, cfg, bounds)
        y = geometry.project_simplex(y - alpha * sinr_all(x, cp))
        grad = grad_x_g(x, y, cp)[1:]
        bx = beta
        if cfg.x_step == "max":
            gmax = np.abs(grad).max()
            if gmax > 0:
                bx = beta / gmax
        x[1:] = step(x[1:] + bx * grad, bx, lam)
        if trace is not None:
            trace.record(outer, j, x, y, cp, lam, alpha, beta)
        alpha *= cfg.stepsize_decay
        beta *= cfg.stepsize_decay
    return x, y


def initial_x(N, K, init="ones", rng=None):
    x = np.ones(N + 1, dtype=complex)
    if init == "center":
        x[1:] = 0.0
    elif init == "random":
        if rng is None:
            raise ValueError("random init needs an rng")
        alphabet = geometry.build_alphabet(K)
        x[1:] = alphabet.points[rng.integers(0, K, size=N)]
    return x


def evaluate_discrete(x, channels, P, sigma2, phi=None, tol=1e-6, max_iter=500):
    """Max-min precoder and per-user SINRs at configuration x."""
    h = effective_channels(x, channels, phi)
    pre = update_w_maxmin(h, P, sigma2, tol=tol, max_iter=max_iter)
    return pre, downlink_sinr(h, pre.W, sigma2)


def alternate(channels, P, sigma2, K, cfg, inner, x0, name, trace=None):
    """Outer loop shared by all x-solvers.

    Each outer iteration re-solves the precoder at the current x, rebuilds
    the couplings and calls ``inner(cp, x, outer, refresh) -> (x, iterations)``
    where ``refresh(x)`` re-solves the precoder at x and returns new
    couplings.  At the end x is rounded to the alphabet (when
    ``cfg.final_round``) and the reported SINRs are evaluated at the rounded
    point.
    """
    t0 = time.perf_counter()
    alphabet = geometry.build_alphabet(K)
    polygon = geometry.hull_of(alphabet)
    phi = build_phi_all(channels)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (channels.U,))
    flags = {}
    last = {}

    def refresh(x):
        pre, f = evaluate_discrete(x, channels, P, sigma2, phi, cfg.precoder_tol,
                                   cfg.precoder_max_iter)
        if not pre.converged:
            flags["precoder_not_converged"] = True
        last["W"], last["f"] = pre.W, f
        return build_couplings(channels, pre.W, sigma2, phi=phi)

    x = np.array(x0, dtype=complex)
    iters = 0
    for i in range(cfg.T1):
        cp = refresh(x)
        if trace is not None:
            trace.outer_min_sinr_db.append(float(to_db(last["f"].min())))
            trace.timestamps.append(time.perf_counter() - t0)
        x_in = x.copy()
        x, n = inner(cp, x, i, refresh)
        iters += n
        # with per-outer resets the next pass would repeat this one exactly
        if cfg.reset_stepsizes and np.array_equal(x, x_in):
            flags["outer_fixed_point"] = i + 1
            break
    on_vertices = bool(np.all(geometry.distance_to_alphabet(x[1:], polygon) <= cfg.vertex_tol))
    if cfg.final_round:
        x[1:] = geometry.round_to_alphabet(x[1:], alphabet)
    else:
        flags["unrounded"] = True
    if cfg.final_w_update:
        refresh(x)
    W = last["W"]
    f = downlink_sinr(effective_channels(x, channels, phi), W, sigma2)
    return TrialResult(algorithm=name, min_sinr=float(f.min()), per_user_sinr=f, x=x, W=W,
                       inner_iterations=iters, runtime_s=time.perf_counter() - t0,
                       converged_to_vertices=on_vertices, trace=trace, flags=flags)


def outer_stepsizes(cfg, outer):
    """Initial (alpha, beta) for an outer iteration."""
    if cfg.reset_stepsizes:
        return cfg.alpha0, cfg.beta0
    decay = cfg.stepsize_decay ** (cfg.T2 * outer)
    return cfg.alpha0 * decay, cfg.beta0 * decay


def solve(channels, scenario, cfg, P, sigma2, K, rng=None):
    """CHR-APGDA: alternate the max-min precoder with the penalized inner loop."""
    N, U = channels.N, channels.U
    if scenario is not None and (scenario.N, scenario.U, scenario.M) != (N, U, channels.M):
        raise ValueError("scenario dimensions do not match the channel set")
    x0 = initial_x(N, K, cfg.init, rng)
    trace = SolveTrace() if cfg.record_trace else None

    def inner(cp, x, outer, refresh):
        a0, b0 = outer_stepsizes(cfg, outer)
        run_cfg = replace(cfg, alpha0=a0, beta0=b0)
        y0 = np.full(U, 1.0 / U)
        x, _ = inner_apgda(cp, x, y0, run_cfg, K, trace=trace, outer=outer, refresh=refresh)
        return x, cfg.T2

    return alternate(channels, P, sigma2, K, cfg, inner, x0, "chr_apgda", trace)
