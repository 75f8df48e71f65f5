from __future__ import annotations

import math

import numpy as np
import pytest

from heightsim.csbp import BranchingParams, csbp_transition_sample, u_closed
from heightsim.heightfield import (STEP_BIAS_CONSTANT, LocalTimeField, band_laplace_exponent,
                                   field_quadrature, girsanov_check, laplace_tolerance,
                                   map_paths, occupation_integral, ray_knight_field)
from heightsim.pathops import project, stop_at_local_time
from heightsim.reflected_bm import ReflectedBmConfig
from heightsim.rng import stream
from heightsim.stats import laplace_compare, mean_compare


@pytest.fixture(scope="module")
def stopped():
    return stop_at_local_time(ReflectedBmConfig(-0.3, 2.0, 1e-4), 1.0, stream(1, "hf"))


def test_field_shape_check():
    with pytest.raises(ValueError):
        LocalTimeField(1.0, np.array([0.0, 1.0]), np.array([1.0]), 0.1)


def test_field_anchor_and_levels(stopped):
    f = ray_knight_field(stopped, [0.0, 0.5, 2.0], 0.04)
    assert f.z[0] == 2 * stopped.reg0[-1] == f.x
    assert f.z[2] == 2 * stopped.regA[-1]
    # level 0 exceeds x by at most the last regulator jump
    assert 0 < f.z[0] - 1.0 <= 2 * (stopped.reg0[-1] - stopped.reg0[-2])
    assert f.rows()[1][0] == 0.5
    with pytest.raises(ValueError):
        ray_knight_field(stopped, [2.5], 0.04)


def test_field_above_path_maximum_is_zero(stopped):
    top = float(stopped.values.max())
    if top < 1.9:
        assert ray_knight_field(stopped, [top + 0.05], 0.04).z[0] == 0.0


def test_occupation_integral_total_time(stopped):
    assert occupation_integral(stopped, np.ones_like) == pytest.approx(stopped.horizon)
    assert occupation_integral(stopped, lambda v: v) <= 2.0 * stopped.horizon


def test_field_quadrature_reconstructs_time():
    cfg = ReflectedBmConfig(0.0, 1.0, 1e-4)
    eps = 0.02
    levels = np.linspace(0, 1, 51)
    for i in range(5):
        s = stop_at_local_time(cfg, 1.0, stream(2, "quad", i))
        q = field_quadrature(ray_knight_field(s, levels, eps))
        assert abs(q - s.horizon) <= (eps + math.sqrt(cfg.dt)) * (1.0 + s.horizon)


def test_projection_invariance_of_field(stopped):
    levels = [0.0, 0.25, 0.5, 0.75]
    full = ray_knight_field(stopped, levels, 0.04).z
    proj = ray_knight_field(project(stopped, 1.0), levels, 0.04).z
    assert np.array_equal(full, proj)


def test_band_exponent_tends_to_point_value():
    # averaging over a band removes O(eps) of the variance of Z, so the gap is linear
    p = BranchingParams(-0.5)
    point = u_closed(p, 1.0, 0.5)
    gaps = [abs(band_laplace_exponent(p, 1.0, 0.5, eps, 2.0) - point)
            for eps in (0.2, 0.1, 0.05, 0.025)]
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all((ratios > 1.9) & (ratios < 2.2))


def test_band_exponent_against_exact_csbp_chains():
    # E exp(-lam * band average of Z) from exact transitions on a fine level grid
    p, lam, lo, hi, h, n = BranchingParams(-0.5), 1.0, 0.4, 0.6, 0.002, 100_000
    rng = stream(3, "band-oracle")
    z = csbp_transition_sample(p, 1.0, lo, rng, size=n)
    acc = 0.5 * z
    steps = int(round((hi - lo) / h))
    for k in range(steps):
        z = csbp_transition_sample(p, z, h, rng)
        acc += z if k < steps - 1 else 0.5 * z
    samples = acc * h / (hi - lo)
    target = math.exp(-band_laplace_exponent(p, lam, 0.5, hi - lo, 2.0))
    assert laplace_compare(samples, lam, target).passed
    # the pointwise value is distinguishable at this sample size
    assert not laplace_compare(samples, lam, math.exp(-u_closed(p, lam, 0.5))).passed


def test_laplace_tolerance_parts():
    p = BranchingParams(0.0)
    band, step = laplace_tolerance(p, 1.0, 1.0, 0.5, 0.04, 2.0, 1e-4)
    assert band > 0 and step > 0
    w = u_closed(p, 1.0, 0.5)
    assert step == pytest.approx(STEP_BIAS_CONSTANT * 0.01 * w * math.exp(-w), rel=1e-2)
    band0, _ = laplace_tolerance(p, 1.0, 1.0, 0.0, 0.04, 2.0, 1e-4, exact_level=True)
    assert band0 == 0.0


def test_map_paths_order_independent_of_workers():
    fn = lambda i: i * i  # noqa: E731
    assert map_paths(fn, 50) == map_paths(fn, 50, workers=3) == [i * i for i in range(50)]


def test_girsanov_theta_zero_coincide():
    cfg0 = ReflectedBmConfig(0.0, 1.0, 1e-3)
    direct, rew = girsanov_check(cfg0, 0.0, 1.0, 1.0, 300, seed=4)
    assert direct.estimate == pytest.approx(rew.estimate, rel=1e-12)


def test_girsanov_normalisation():
    # lam = 0: the weights average to 1 (exact likelihood ratio of the grid walk)
    cfg0 = ReflectedBmConfig(0.0, 1.0, 1e-4)
    direct, rew = girsanov_check(cfg0, 0.5, 0.0, 1.0, 2000, seed=5)
    assert direct.estimate == 1.0 and direct.passed
    assert rew.passed, rew.line()


def test_girsanov_requires_critical_base():
    with pytest.raises(ValueError):
        girsanov_check(ReflectedBmConfig(0.1, 1.0), 0.5, 1.0, 1.0, 100, seed=0)


def test_ray_knight_small_scale_critical():
    cfg = ReflectedBmConfig(0.0, 1.0, 1e-4)
    zs = np.array([ray_knight_field(stop_at_local_time(cfg, 1.0, stream(6, "rk", i)), [0.5], 0.02).z[0]
                   for i in range(1000)])
    p = BranchingParams(0.0)
    band, step = laplace_tolerance(p, 1.0, 1.0, 0.5, 0.02, 1.0, 1e-4)
    assert laplace_compare(zs, 1.0, math.exp(-u_closed(p, 1.0, 0.5)), band + step).passed
    assert mean_compare(zs, 1.0, STEP_BIAS_CONSTANT * 0.01).passed
