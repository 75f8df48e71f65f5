from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from heightsim.reflected_bm import (GridPath, ReflectedBmConfig, band_edges, band_local_time,
                                    band_local_times, boundary_local_time, simulate_reflected,
                                    stationary_cdf, stationary_density, tanaka_residual)
from heightsim.rng import stream
from heightsim.stats import diff_compare, ks_test


def _flat(value, n, dt, a=1.0):
    v = np.full(n + 1, value, dtype=float)
    z = np.zeros(n + 1)
    return GridPath(dt, v, z, z.copy(), a)


def test_config_validation():
    with pytest.raises(ValueError):
        ReflectedBmConfig(0.0, 0.0)
    with pytest.raises(ValueError):
        ReflectedBmConfig(0.0, 1.0, dt=0.0)
    with pytest.raises(ValueError):
        ReflectedBmConfig(0.0, 1.0, max_steps=0)
    with pytest.warns(RuntimeWarning):
        ReflectedBmConfig(0.0, 0.1, dt=0.01)


def test_zero_steps():
    p = simulate_reflected(ReflectedBmConfig(0.3, 1.0), 0, stream(0, "z"))
    assert p.values.tolist() == [0.0] and p.reg0.tolist() == [0.0] and p.regA.tolist() == [0.0]


def test_step_budget():
    with pytest.raises(ValueError):
        simulate_reflected(ReflectedBmConfig(0.0, 1.0, max_steps=10), 11, stream(0, "b"))


def test_narrow_barrier_warns():
    with pytest.warns(RuntimeWarning):
        simulate_reflected(ReflectedBmConfig(0.0, 0.009, dt=1e-4), 10, stream(0, "w"))


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 3), st.floats(1e-5, 1e-2), st.integers(0, 10**6))
def test_path_invariants(theta, a, rel_dt, seed):
    dt = rel_dt * a * a
    cfg = ReflectedBmConfig(theta, a, dt)
    p = simulate_reflected(cfg, 2000, stream(seed, "inv"))
    v = p.values
    assert np.all((v >= 0) & (v <= a))
    d0 = np.diff(p.reg0)
    da = np.diff(p.regA)
    assert p.reg0[0] == 0 and p.regA[0] == 0
    assert np.all(d0 >= 0) and np.all(da >= 0)
    assert not np.any((d0 > 0) & (da > 0))
    proposal = v[:-1] + cfg.drift_step + p.increments
    assert np.all((d0 > 0) == (proposal < 0))
    assert np.all((da > 0) == (proposal > a))
    assert tanaka_residual(p) < 1e-11


def test_tanaka_needs_noise():
    with pytest.raises(ValueError):
        tanaka_residual(_flat(0.0, 3, 0.1))


def test_grid_path_checks():
    z = np.zeros(3)
    with pytest.raises(ValueError):
        GridPath(0.1, z, z[:2], z, 1.0)
    with pytest.raises(ValueError):
        GridPath(0.1, z, z, z, 1.0, 0.0, np.zeros(3))
    p = _flat(0.2, 10, 0.1)
    assert p.index(0.3) == 3 and p.horizon == pytest.approx(1.0)
    with pytest.raises(ValueError):
        p.index(1.2)
    assert set(p.as_columns()) == {"t", "value", "reg0", "regA"}


def test_band_zero_path():
    assert band_local_time(_flat(0.0, 50, 0.01, a=2.0), 1.0, 0.1, 0.5) == 0.0


def test_band_synthetic_constant_path():
    # 100 steps of 0.01 at level 0.5: occupation 1.0 in a band of width 0.1
    assert band_local_time(_flat(0.5, 100, 0.01), 0.5, 0.1, 1.0) == pytest.approx(10.0)


def test_band_edges_half_width_at_boundaries():
    assert band_edges(0.0, 0.1, 1.0) == (0.0, 0.05)
    assert band_edges(1.0, 0.1, 1.0) == (0.95, 1.0)
    assert band_edges(0.5, 0.1, 1.0) == pytest.approx((0.45, 0.55))
    with pytest.raises(ValueError):
        band_edges(1.5, 0.1, 1.0)
    with pytest.raises(ValueError):
        band_edges(0.5, 0.0, 1.0)


def test_band_local_times_vector_matches_scalar():
    p = simulate_reflected(ReflectedBmConfig(-0.2, 1.0, 1e-3), 3000, stream(3, "vec"))
    levels = [0.0, 0.3, 0.6, 1.0]
    vec = band_local_times(p, levels, 0.05, 2.0)
    for r, z in zip(levels, vec):
        assert z == band_local_time(p, r, 0.05, 2.0)


def test_boundary_local_time():
    p = simulate_reflected(ReflectedBmConfig(0.0, 10.0, 1e-4), 1000, stream(4, "ub"))
    assert boundary_local_time(p, "upper", p.horizon) == 0.0
    assert boundary_local_time(p, "lower", p.horizon) == 2.0 * p.reg0[-1]
    with pytest.raises(ValueError):
        boundary_local_time(p, "middle", 0.0)


def test_band_at_zero_agrees_with_regulator():
    # boundary band [0, eps/2]: allowance O(eps) for the band average plus
    # O(sqrt(dt)/eps) for the grid's atom at 0
    dt, eps, n = 1e-5, 0.1, 400
    cfg = ReflectedBmConfig(0.0, 2.0, dt)
    band, reg = [], []
    for i in range(n):
        p = simulate_reflected(cfg, int(round(1 / dt)), stream(5, "b0", i))
        band.append(band_local_time(p, 0.0, eps, 1.0))
        reg.append(boundary_local_time(p, "lower", 1.0))
    scale = float(np.mean(reg))
    res = diff_compare(band, reg, bias=(eps / 2 + math.sqrt(dt) / eps) * scale)
    assert res.passed, res.line()


def test_boundary_balance_driftless():
    # long-run rates of the two regulators agree at theta = 0
    p = simulate_reflected(ReflectedBmConfig(0.0, 1.0, 1e-3), 2_000_000, stream(6, "bal"))
    l0 = boundary_local_time(p, "lower", p.horizon) / p.horizon
    la = boundary_local_time(p, "upper", p.horizon) / p.horizon
    assert abs(l0 - la) < 0.05 * l0


def test_dt_refinement_local_time():
    def mean_l0(dt, tag):
        cfg = ReflectedBmConfig(0.0, 1.0, dt)
        n = int(round(1.0 / dt))
        return np.array([2 * simulate_reflected(cfg, n, stream(7, tag, i)).reg0[-1]
                         for i in range(2000)])
    coarse, fine = mean_l0(4e-4, "c"), mean_l0(2e-4, "f")
    se = math.sqrt(coarse.var(ddof=1) / coarse.size + fine.var(ddof=1) / fine.size)
    assert abs(coarse.mean() - fine.mean()) < 3 * se


def test_stationary_density_examples():
    assert stationary_density(0.0, 2.0, 1.0) == pytest.approx(0.5)
    for theta, a in ((0.0, 2.0), (0.5, 1.0), (-0.5, 1.0), (1.3, 0.4)):
        total, _ = integrate.quad(lambda x: stationary_density(theta, a, x), 0, a)
        assert total == pytest.approx(1.0, abs=1e-10)
    x = np.linspace(0, 1, 11)
    assert np.all(np.diff(stationary_density(-0.5, 1.0, x)) > 0)
    with pytest.raises(ValueError):
        stationary_density(0.0, 1.0, 1.5)


@pytest.mark.parametrize("theta", [-0.5, 0.0, 0.5])
def test_stationary_cdf_integrates_density(theta):
    for x in (0.1, 0.5, 0.9):
        val, _ = integrate.quad(lambda y: stationary_density(theta, 1.0, y), 0, x)
        assert stationary_cdf(theta, 1.0, x) == pytest.approx(val, abs=1e-12)


@pytest.mark.parametrize("theta", [-0.5, 0.5])
def test_stationary_density_matches_birth_death_chain(theta):
    # generator 1/2 f'' - 2 theta f' on a fine grid with reflecting ends;
    # detailed balance gives the chain's invariant vector
    a, m = 1.0, 4000
    h = a / m
    up = 0.5 / h**2 - theta / h
    down = 0.5 / h**2 + theta / h
    log_pi = np.concatenate(([0.0], np.cumsum(np.full(m, math.log(up / down)))))
    pi = np.exp(log_pi - log_pi.max())
    pi /= pi.sum() * h
    grid = np.linspace(0, a, m + 1)
    assert np.allclose(pi, stationary_density(theta, a, grid), rtol=2e-3)


@pytest.mark.parametrize("theta", [-0.5, 0.0, 0.5])
def test_stationary_marginal_small_scale(theta):
    cfg = ReflectedBmConfig(theta, 1.0, 1e-4)
    xs = [simulate_reflected(cfg, 15000, stream(8, "st", theta, i)).values[-1] for i in range(600)]
    res = ks_test(xs, lambda v: stationary_cdf(theta, 1.0, v))
    assert res.passed, res.line()


def test_clip_atom_mass():
    # long-run share of steps pinned at 0; the stationary law of the clipped
    # chain (fine-cell transition matrix, h = sqrt(dt)/20) gives 0.0162
    cfg = ReflectedBmConfig(0.5, 1.0, 1e-4)
    v = simulate_reflected(cfg, 4_000_000, stream(9, "atom")).values[10_000:]
    assert np.mean(v == 0.0) == pytest.approx(0.0162, rel=0.1)
