"""Scenario geometry, log-distance pathloss and Rician fading channels.

Randomness comes from numpy's Philox counter-based generator.  A trial's
64-bit seed is derived from the master seed and the trial coordinates through
``numpy.random.SeedSequence`` (a documented hash), so every trial can be
regenerated in isolation.
"""
from dataclasses import dataclass, field, asdict

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

LINK_TYPES = ("bs_user", "bs_irs", "irs_user")


@dataclass
class ScenarioConfig:
    M: int = 8
    N: int = 32
    U: int = 4
    carrier_freq: float = 2.6e9
    rician_k: float = 10.0
    bs_position: tuple = (0.0, 0.0, 10.0)
    irs_position: tuple = (100.0, 20.0, 5.0)
    # axis-aligned box (xmin, xmax, ymin, ymax, zmin, zmax)
    user_region: tuple = (90.0, 110.0, 10.0, 30.0, 1.5, 1.5)
    # (PL0 dB at d0, exponent) per link type
    pathloss: dict = field(default_factory=lambda: {
        "bs_user": (32.6, 3.67),
        "bs_irs": (30.0, 2.2),
        "irs_user": (30.0, 2.2),
    })
    reference_distance: float = 1.0
    # IRS panel shape; None picks the most square factorization of N
    irs_shape: tuple = None
    seed: int = 0

    def __post_init__(self):
        for name in ("M", "N", "U"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.rician_k < 0:
            raise ValueError("rician_k must be >= 0")
        pts = [self.bs_position, self.irs_position, self.user_region]
        if not all(np.all(np.isfinite(np.asarray(p, dtype=float))) for p in pts):
            raise ValueError("positions must be finite")
        self.bs_position = tuple(float(v) for v in self.bs_position)
        self.irs_position = tuple(float(v) for v in self.irs_position)
        self.user_region = tuple(float(v) for v in self.user_region)
        self.pathloss = {k: tuple(float(x) for x in v) for k, v in self.pathloss.items()}
        if self.irs_shape is not None:
            self.irs_shape = tuple(int(v) for v in self.irs_shape)
            if self.irs_shape[0] * self.irs_shape[1] != self.N:
                raise ValueError(f"irs_shape {self.irs_shape} does not have N={self.N} elements")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_freq

    def panel_shape(self):
        if self.irs_shape is not None:
            return self.irs_shape
        n1 = int(np.floor(np.sqrt(self.N)))
        while self.N % n1:
            n1 -= 1
        return (self.N // n1, n1)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ChannelSet:
    """d: (U, M) direct channels, F: (N, M) BS->IRS, g: (U, N) IRS->user rows."""

    d: np.ndarray
    F: np.ndarray
    g: np.ndarray

    @property
    def U(self):
        return self.d.shape[0]

    @property
    def M(self):
        return self.d.shape[1]

    @property
    def N(self):
        return self.F.shape[0]


def steering_ula(M, angle):
    """Half-wavelength ULA response exp(j pi m sin(angle)), m = 0..M-1."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return np.exp(1j * np.pi * np.arange(M) * np.sin(angle))


def steering_upa(N1, N2, azimuth, elevation):
    """Half-wavelength UPA response, kron of the horizontal and vertical ramps."""
    if N1 < 1 or N2 < 1:
        raise ValueError("N1 and N2 must be >= 1")
    a1 = np.exp(1j * np.pi * np.arange(N1) * np.sin(azimuth) * np.cos(elevation))
    a2 = np.exp(1j * np.pi * np.arange(N2) * np.sin(elevation))
    return np.kron(a1, a2)


def pathloss_db(distance, link_type, config=None):
    """Log-distance pathloss PL0 + 10 gamma log10(d / d0) in dB."""
    if np.any(np.asarray(distance) <= 0):
        raise ValueError("distance must be positive")
    config = config or ScenarioConfig()
    if link_type not in config.pathloss:
        raise ValueError(f"unknown link type {link_type!r}")
    pl0, gamma = config.pathloss[link_type]
    return pl0 + 10.0 * gamma * np.log10(np.asarray(distance) / config.reference_distance)


def trial_seed(master_seed, *keys):
    """64-bit per-trial seed hashed from the master seed and integer keys."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed):
    return np.random.Generator(np.random.Philox(key=int(seed)))


# BS array axis and IRS panel frame (unit vectors in the global frame)
_BS_AXIS = np.array([0.0, 1.0, 0.0])
_IRS_H = np.array([0.0, 1.0, 0.0])
_IRS_V = np.array([0.0, 0.0, 1.0])


def _ula_toward(M, origin, target):
    u = np.asarray(target) - np.asarray(origin)
    u = u / np.linalg.norm(u)
    return steering_ula(M, np.arcsin(np.clip(u @ _BS_AXIS, -1, 1)))


def _upa_toward(shape, origin, target):
    u = np.asarray(target) - np.asarray(origin)
    u = u / np.linalg.norm(u)
    el = np.arcsin(np.clip(u @ _IRS_V, -1, 1))
    ce = np.cos(el)
    az = np.arcsin(np.clip((u @ _IRS_H) / ce, -1, 1)) if ce > 1e-12 else 0.0
    return steering_upa(shape[0], shape[1], az, el)


def _nlos(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician(rng, los, pl_db, k):
    gain = np.sqrt(10.0 ** (-pl_db / 10.0))
    if np.isinf(k):
        return gain * los
    nlos = _nlos(rng, los.shape)
    return gain * (np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * nlos)


def draw_user_positions(config, rng):
    lo = np.array(config.user_region[0::2])
    hi = np.array(config.user_region[1::2])
    return lo + (hi - lo) * rng.random((config.U, 3))


def draw_channels(config, rng):
    """One Monte-Carlo channel realization for ``config``.

    ``rng`` is a numpy Generator or an integer seed.  Draw order: user
    positions, then F, then each user's (d_u, g_u).
    """
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    M, N, U = config.M, config.N, config.U
    k = float(config.rician_k)
    lam = config.wavelength
    shape = config.panel_shape()
    bs = np.asarray(config.bs_position)
    irs = np.asarray(config.irs_position)
    users = draw_user_positions(config, rng)

    def prop_phase(dist):
        return np.exp(-2j * np.pi * dist / lam)

    d_bi = np.linalg.norm(irs - bs)
    los_F = prop_phase(d_bi) * np.outer(_upa_toward(shape, irs, bs), np.conj(_ula_toward(M, bs, irs)))
    F = _rician(rng, los_F, pathloss_db(d_bi, "bs_irs", config), k)

    d = np.empty((U, M), dtype=complex)
    g = np.empty((U, N), dtype=complex)
    for u in range(U):
        d_bu = np.linalg.norm(users[u] - bs)
        los_d = prop_phase(d_bu) * np.conj(_ula_toward(M, bs, users[u]))
        d[u] = _rician(rng, los_d, pathloss_db(d_bu, "bs_user", config), k)
        d_iu = np.linalg.norm(users[u] - irs)
        los_g = prop_phase(d_iu) * np.conj(_upa_toward(shape, irs, users[u]))
        g[u] = _rician(rng, los_g, pathloss_db(d_iu, "irs_user", config), k)
    return ChannelSet(d=d, F=F, g=g)
