import numpy as np
import pytest

from chrbeam import geometry
from chrbeam.baselines import (BaselineConfig, gda_inner, run_gda, run_unit_circle,
                               smooth_min, smooth_min_weights, solve_exhaustive, solve_gda,
                               solve_random, solve_unit_circle, unit_circle_inner)
from chrbeam.channel import ScenarioConfig, draw_channels, make_rng
from chrbeam.precoder import downlink_sinr, effective_channels, update_w_maxmin
from chrbeam.sinr import CouplingMatrices, build_couplings, sinr_all
from chrbeam.solver import SolverConfig, SolveTrace, initial_x, inner_apgda, solve
from oracles import enumerate_configs, random_channels, random_precoder

P, S2 = 1.0, 1e-12


def toy_couplings(seed, N=6, U=3, M=4, sigma2=0.3):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng, M, N, U)
    return build_couplings(ch, random_precoder(rng, M, U), sigma2)


def test_config_validation():
    with pytest.raises(ValueError):
        BaselineConfig(algorithm="sdr")
    with pytest.raises(ValueError):
        BaselineConfig(draws=0)
    with pytest.raises(ValueError):
        BaselineConfig(temperature_scale=0.0)
    scfg = BaselineConfig(T1=3, beta0=0.02).solver_config()
    assert isinstance(scfg, SolverConfig) and scfg.T1 == 3 and scfg.beta0 == 0.02


@pytest.mark.parametrize("K", [2, 4])
def test_gda_is_unpenalized_chr(K):
    cp = toy_couplings(1)
    cfg = BaselineConfig(T2=300)
    x0 = initial_x(6, K, "center")
    y0 = np.full(3, 1 / 3)
    t_gda, t_chr = SolveTrace(), SolveTrace()
    xg, yg = gda_inner(cp, x0, y0, cfg, K, trace=t_gda)
    xc, yc = inner_apgda(cp, x0, y0, cfg.solver_config(fixed_lambda=0.0), K, trace=t_chr)
    assert np.allclose(xg, xc, atol=1e-12) and np.allclose(yg, yc, atol=1e-12)
    assert np.allclose(t_gda.min_sinr_db, t_chr.min_sinr_db, atol=1e-9)


def test_gda_iterates_feasible():
    cp = toy_couplings(2)
    poly = geometry.build_polygon(4)
    x = initial_x(6, 4, "center")
    y = np.full(3, 1 / 3)
    for _ in range(20):
        x, y = gda_inner(cp, x, y, BaselineConfig(T2=20), 4)
        assert geometry.in_hull(x[1:], poly).all()
    res = solve_gda(cp, BaselineConfig(T2=200), 4)
    assert np.all(np.isin(res.x[1:], geometry.build_alphabet(4).points))


@pytest.mark.parametrize("T2", [1, 7, 60])
def test_unit_circle_iterates_unit_modulus(T2):
    cp = toy_couplings(3)
    x = unit_circle_inner(cp, initial_x(6, 4, "ones"), BaselineConfig(T2=T2), 4)
    assert np.all(np.abs(np.abs(x[1:]) - 1) < 1e-12)
    assert x[0] == 1


def test_unit_circle_single_path_alignment():
    rng = np.random.default_rng(4)
    b = rng.normal(size=2) + 1j * rng.normal(size=2)
    cp = CouplingMatrices(vecs=b.reshape(1, 1, 2), sigma2=np.array([1.0]))
    K = 8
    x_star = np.exp(1j * (np.angle(b[1]) - np.angle(b[0])))
    x = unit_circle_inner(cp, initial_x(1, K, "ones"), BaselineConfig(T2=2000), K)
    assert abs(x[1] - x_star) < 1e-4
    res = solve_unit_circle(cp, BaselineConfig(T2=2000), K)
    assert res.x[1] == geometry.round_to_alphabet(x_star, geometry.build_alphabet(K))


def test_smooth_min_limits():
    f = np.array([3.0, 3.2])
    assert smooth_min(f, 1e-4) == pytest.approx(3.0, abs=1e-3)
    assert smooth_min(f, 0.5) <= 3.0
    assert smooth_min(f, 1e-6) <= f.min()
    w = smooth_min_weights(f, 1e-3)
    assert w.sum() == pytest.approx(1) and w[0] > 0.999


def test_random_single_draw_and_prefix_monotone():
    ch = draw_channels(ScenarioConfig(M=4, N=8, U=3), 5)
    one = solve_random(ch, P, S2, 4, 1, make_rng(9))
    assert np.all(np.isin(one.x[1:], geometry.build_alphabet(4).points))
    vals = [solve_random(ch, P, S2, 4, d, make_rng(9)).min_sinr for d in (1, 5, 20, 80)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        solve_random(ch, P, S2, 4, 0, make_rng(9))


def test_exhaustive_n1_k2():
    ch = draw_channels(ScenarioConfig(M=4, N=1, U=2), 6)
    res = solve_exhaustive(ch, P, S2, 2)
    vals = []
    for x1 in (1, -1):
        x = np.array([1, x1], complex)
        h = effective_channels(x, ch)
        vals.append(downlink_sinr(h, update_w_maxmin(h, P, S2).W, S2).min())
    assert res.min_sinr == pytest.approx(max(vals))
    assert res.flags["evaluations"] == 2


def test_exhaustive_guard():
    ch = draw_channels(ScenarioConfig(M=4, N=21, U=2), 0)
    with pytest.raises(ValueError, match="2\\*\\*20"):
        solve_exhaustive(ch, P, S2, 2)
    with pytest.raises(ValueError):
        solve_exhaustive(ch, P, S2, 2, N=20)


def test_exhaustive_matches_enumeration_and_chunking():
    ch = draw_channels(ScenarioConfig(M=4, N=5, U=3), 7)
    X = enumerate_configs(5, 2)
    h = effective_channels(X, ch)
    ref = downlink_sinr(h, update_w_maxmin(h, P, S2).W, S2).min(axis=-1).max()
    a = solve_exhaustive(ch, P, S2, 2)
    b = solve_exhaustive(ch, P, S2, 2, cfg=BaselineConfig(algorithm="exhaustive",
                                                          exhaustive_chunk=3))
    assert a.min_sinr == pytest.approx(ref, rel=1e-9)
    assert np.array_equal(a.x, b.x) and a.min_sinr == b.min_sinr


def test_exhaustive_ties_go_to_smallest_index():
    # no reflected path: every configuration scores the same
    rng = np.random.default_rng(8)
    ch = random_channels(rng, 4, 3, 2)
    from chrbeam.channel import ChannelSet
    ch = ChannelSet(d=ch.d, F=ch.F, g=np.zeros_like(ch.g))
    res = solve_exhaustive(ch, 1.0, 1.0, 4)
    assert np.array_equal(res.x, np.ones(4))


def test_exhaustive_shared_w_flag():
    ch = draw_channels(ScenarioConfig(M=4, N=4, U=2), 9)
    W = update_w_maxmin(effective_channels(np.ones(5), ch), P, S2).W
    res = solve_exhaustive(ch, P, S2, 2, shared_W=W)
    assert res.flags.get("shared_w")
    assert np.array_equal(res.W, W)


@pytest.mark.parametrize("seed", range(3))
def test_exhaustive_dominates_everything(seed):
    sc = ScenarioConfig(M=8, N=8, U=3)
    ch = draw_channels(sc, 40 + seed)
    best = solve_exhaustive(ch, P, S2, 2).min_sinr_db
    short = BaselineConfig(T1=2, T2=300)
    others = [
        solve(ch, sc, SolverConfig(T1=2, T2=300, record_trace=False), P, S2, 2),
        run_gda(ch, P, S2, 2, short),
        run_unit_circle(ch, P, S2, 2, short),
        solve_random(ch, P, S2, 2, 50, make_rng(seed)),
    ]
    for r in others:
        assert r.min_sinr_db <= best + 1e-5


def test_run_wrappers_report_rounded_points():
    ch = draw_channels(ScenarioConfig(M=4, N=6, U=2), 10)
    A = geometry.build_alphabet(4).points
    for res in (run_gda(ch, P, S2, 4, BaselineConfig(T1=2, T2=100), record_trace=True),
                run_unit_circle(ch, P, S2, 4, BaselineConfig(T1=2, T2=100), record_trace=True)):
        assert np.all(np.isin(res.x[1:], A))
        assert len(res.trace) == 200
        f = downlink_sinr(effective_channels(res.x, ch), res.W, S2)
        assert np.allclose(f, res.per_user_sinr)
