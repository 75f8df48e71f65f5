from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heightsim.pathops import (MaxStepsExceeded, clock_below, project, stop_at_local_time,
                               subsample, time_below)
from heightsim.reflected_bm import GridPath, ReflectedBmConfig, simulate_reflected, tanaka_residual
from heightsim.rng import stream
from heightsim.stats import mean_compare


def _path(values, dt=1.0, a=None):
    v = np.asarray(values, dtype=float)
    z = np.zeros_like(v)
    return GridPath(dt, v, z, z.copy(), float(v.max()) if a is None else a)


def _random_path(seed, n=3000, a=2.0):
    rng = stream(seed, "pathops")
    cfg = ReflectedBmConfig(rng.uniform(-1, 1), a, 1e-3)
    return simulate_reflected(cfg, n, rng)


def test_time_below_hand_trace():
    assert time_below(_path([0, 1, 2, 1, 0]), 1.5, 4) == 4


def test_time_below_whole_path_below():
    # every grid point s <= t counts, including s = 0
    p = _path([0, 0.2, 0.1, 0.3], dt=0.5, a=1.0)
    assert time_below(p, 0.5, 1.5) == pytest.approx(1.5 + 0.5)


def test_time_below_only_initial_point():
    assert time_below(_path([0, 2, 3, 2], a=3.0), 1.0, 3) == 1.0


def test_clock():
    p = _path([0, 1, 2, 1, 0])
    clock = clock_below(p, 1.5)
    assert clock.A.tolist() == [0, 1, 2, 2, 3, 4]
    assert np.all(np.diff(clock.A) >= 0) and set(np.diff(clock.A)) <= {0.0, 1.0}
    assert clock.inverse(2) == 3


def test_project_hand_trace():
    q = project(_path([0, 1, 2, 1, 0]), 1.5)
    assert q.values.tolist() == [0, 1, 1, 0] and q.a == 1.5


def test_project_below_is_identity():
    p = _random_path(1)
    b = float(p.values.max()) + 1e-9
    if b < p.a:
        q = project(p, b)
        assert np.array_equal(q.values, p.values) and np.array_equal(q.reg0, p.reg0)
    assert project(p, p.a) is p


def test_project_domain():
    p = _random_path(2)
    with pytest.raises(ValueError):
        project(p, 0.0)
    with pytest.raises(ValueError):
        project(p, p.a + 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_composition_and_idempotence(seed, f1, f2):
    p = _random_path(seed)
    b, c = sorted((f1 * p.a, f2 * p.a), reverse=True)
    if b == c:
        return
    direct = project(p, c)
    twice = project(project(p, b), c)
    assert np.array_equal(direct.values, twice.values)
    assert np.array_equal(direct.reg0, twice.reg0)
    assert np.allclose(direct.regA, twice.regA, atol=1e-12)
    again = project(direct, c)
    assert again is direct


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 0.95))
def test_projection_bookkeeping(seed, f):
    p = _random_path(seed)
    b = f * p.a
    q = project(p, b)
    assert len(q) * p.dt == pytest.approx(time_below(p, b, p.horizon))
    assert np.all(q.values <= b)
    assert np.all(np.diff(q.regA) >= -1e-12) and np.all(np.diff(q.reg0) >= 0)
    assert tanaka_residual(q) < 1e-10


def test_subsample_without_rebuild():
    p = _random_path(3)
    idx = np.flatnonzero(p.values <= 1.0)
    q = subsample(p, idx, 1.0, theta=0.7, rebuild=False)
    assert q.theta == 0.7 and q.increments is None
    consecutive = np.diff(idx) == 1
    assert np.allclose(np.diff(q.regA)[~consecutive], 0.0)


def test_stop_at_first_clip_for_tiny_x():
    p = stop_at_local_time(ReflectedBmConfig(0.0, 1.0, 1e-4), 1e-9, stream(4, "tiny"))
    assert 2 * p.reg0[-1] > 1e-9
    assert np.flatnonzero(np.diff(p.reg0) > 0)[0] == p.n_steps - 1


@pytest.mark.parametrize("x", [0.3, 1.0])
def test_stop_is_first_passage(x):
    cfg = ReflectedBmConfig(-0.3, 1.0, 1e-4)
    p = stop_at_local_time(cfg, x, stream(5, "fp", x))
    assert 2 * p.reg0[-1] > x and 2 * p.reg0[-2] <= x
    assert p.values[-1] == 0.0
    assert tanaka_residual(p) < 1e-10


def test_stop_matches_plain_simulation_prefix():
    cfg = ReflectedBmConfig(0.2, 1.0, 1e-4)
    p = stop_at_local_time(cfg, 1.0, stream(6, "prefix"))
    q = simulate_reflected(cfg, p.n_steps, stream(6, "prefix"))
    assert np.array_equal(p.values, q.values) and np.array_equal(p.reg0, q.reg0)


def test_max_steps_exceeded_carries_partial_path():
    cfg = ReflectedBmConfig(0.0, 1.0, 1e-4, max_steps=5000)
    with pytest.raises(MaxStepsExceeded) as info:
        stop_at_local_time(cfg, 100.0, stream(7, "budget"))
    err = info.value
    assert err.partial.n_steps == 5000 and err.target == 100.0
    assert err.local_time == pytest.approx(2 * err.partial.reg0[-1])


def test_stop_rejects_nonpositive_x():
    with pytest.raises(ValueError):
        stop_at_local_time(ReflectedBmConfig(0.0, 1.0), 0.0, stream(0, "x"))


def test_mean_stopping_time_critical():
    # E[T_x] = x a at theta = 0; the grid adds O(sqrt(dt)), far below 3 SE here
    cfg = ReflectedBmConfig(0.0, 1.0, 1e-4)
    ts = [stop_at_local_time(cfg, 1.0, stream(8, "ET", i)).horizon for i in range(1000)]
    assert mean_compare(ts, 1.0).passed
