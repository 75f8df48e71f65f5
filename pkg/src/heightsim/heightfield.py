"""Local-time fields of stopped height paths and the checks built on them."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .csbp import BranchingParams, forced_ode, u_closed
from .pathops import stop_at_local_time
from .reflected_bm import GridPath, ReflectedBmConfig, band_edges, band_local_times
from .rng import BROWNIAN, stream
from .stats import TestResult, laplace_compare, mean_compare

__all__ = [
    "LocalTimeField",
    "ray_knight_field",
    "occupation_integral",
    "field_quadrature",
    "band_laplace_exponent",
    "laplace_tolerance",
    "girsanov_check",
    "map_paths",
    "STEP_BIAS_CONSTANT",
]

# -zeta(1/2)/sqrt(2 pi): mean overshoot of a Gaussian random walk ladder, in
# units of sqrt(dt).  The stopping step overshoots x, and the regulator jump
# is twice that in local-time units, so a stopped grid path carries mass
# x + 2 * 0.5826 * sqrt(dt) on average.  Interior levels of the field follow
# the realised mass.
STEP_BIAS_CONSTANT = 2 * 0.5825971579390106


@dataclass(frozen=True)
class LocalTimeField:
    x: float
    levels: np.ndarray
    z: np.ndarray
    epsilon: float

    def __post_init__(self):
        if len(self.levels) != len(self.z):
            raise ValueError("levels and z must have equal length")

    def rows(self):
        return list(zip(self.levels.tolist(), self.z.tolist()))


def ray_knight_field(stopped: GridPath, levels, epsilon: float,
                     x: float | None = None) -> LocalTimeField:
    """Z_r = L_r(T_x) at each level.

    Interior levels use the band estimator; level 0 and the barrier level use
    twice the corresponding regulator, which is exact for the grid path.
    """
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < 0) or np.any(levels > stopped.a):
        raise ValueError(f"levels must lie in [0, {stopped.a}]")
    z = band_local_times(stopped, levels, epsilon) if levels.size else np.zeros(0)
    z = np.asarray(z, dtype=float)
    z[levels == 0.0] = 2.0 * stopped.reg0[-1]
    z[levels == stopped.a] = 2.0 * stopped.regA[-1]
    if x is None:
        x = 2.0 * float(stopped.reg0[-1])
    return LocalTimeField(float(x), levels, z, float(epsilon))


def occupation_integral(stopped: GridPath, g) -> float:
    """dt * sum_{k < n} g(H_k): the grid form of int_0^T g(H_s) ds."""
    v = stopped.values[:-1]
    return float(np.sum(np.broadcast_to(g(v), v.shape))) * stopped.dt


def field_quadrature(field: LocalTimeField) -> float:
    """Trapezoidal sum of z over the level ladder."""
    return float(np.trapezoid(field.z, field.levels))


def band_laplace_exponent(params: BranchingParams, lam: float, level: float,
                          epsilon: float, a: float, dt_ode: float = 1e-5) -> float:
    """w with E_x[exp(-lam * Zbar)] = exp(-x w), Zbar the band average of Z.

    Zbar = (1/width) int_{band} Z_y dy over the clipped band.  The exponent
    solves v' = lam/width - psi(v) across the band from v = 0 at its top,
    then follows the free flow u(v, lo) down to level 0.
    """
    lo, hi = band_edges(level, epsilon, a)
    width = hi - lo
    v = forced_ode(params, 0.0, lam / width, width, dt_ode=min(dt_ode, width / 50))
    return u_closed(params, v, lo)


def laplace_tolerance(params: BranchingParams, x: float, lam: float, level: float,
                      epsilon: float, a: float, dt: float, exact_level: bool = False):
    """(band bias, step bias) for comparing E[exp(-lam Z_r)] with exp(-x u(lam, r)).

    The band term is the exact distance between the band-averaged and the
    pointwise Laplace transforms.  The step term is the first-order effect of
    the stopping overshoot STEP_BIAS_CONSTANT * sqrt(dt) in the mass.
    """
    point = u_closed(params, lam, level)
    w = point if exact_level else band_laplace_exponent(params, lam, level, epsilon, a)
    band = abs(math.exp(-x * w) - math.exp(-x * point))
    step = STEP_BIAS_CONSTANT * math.sqrt(dt) * max(w, point) * math.exp(-x * min(w, point))
    return band, step


def map_paths(fn, n: int, workers: int = 1) -> list:
    """[fn(0), ..., fn(n-1)] in index order; threads when workers > 1."""
    if workers <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n), chunksize=max(1, n // (8 * workers))))


def girsanov_check(cfg0: ReflectedBmConfig, theta: float, lam: float, x: float,
                   n_paths: int, seed: int, workers: int = 1,
                   ess_floor: float = 0.05, step_bias: bool = False) -> list[TestResult]:
    """Estimate E[exp(-lam Z_a)] under theta directly and by reweighting theta=0 paths.

    The weight exp(theta L_0 - theta Z_a - 2 theta^2 T) uses the realised
    local time L_0 = 2*reg0 at the stop; on the grid it is then exactly the
    likelihood ratio of the stopped Gaussian walk.  T stands for int_0^a Z_r dr.
    Both estimates are compared with exp(-x u(lam, a)) at 3 SE, plus the
    first-order grid term when ``step_bias`` is set.
    """
    if cfg0.theta != 0.0:
        raise ValueError("girsanov_check simulates under theta = 0")
    a = cfg0.a
    params = BranchingParams(theta)
    target = math.exp(-x * u_closed(params, lam, a))
    cfg = ReflectedBmConfig(theta, a, cfg0.dt, cfg0.max_steps)
    step = 0.0
    if step_bias:
        _, step = laplace_tolerance(params, x, lam, a, 1.0, a, cfg0.dt, exact_level=True)

    def under(c, tag):
        def one(i):
            p = stop_at_local_time(c, x, stream(seed, tag, i, BROWNIAN))
            return 2.0 * p.reg0[-1], 2.0 * p.regA[-1], p.horizon
        return np.array(map_paths(one, n_paths, workers))

    base = under(cfg0, "girsanov-base")
    # at theta = 0 every weight is 1 and both estimators use the same paths
    direct = base if theta == 0 else under(cfg, f"girsanov-direct-{theta}")
    l0, za, tt = base.T
    log_w = theta * l0 - theta * za - 2.0 * theta * theta * tt
    terms = np.exp(log_w - lam * za)
    # plain (not self-normalised) importance mean: degeneracy is judged on the
    # summands themselves
    ess = float(terms.sum() ** 2 / np.sum(terms * terms)) if np.any(terms) else 0.0
    r_direct = laplace_compare(direct[:, 1], lam, target, step,
                               name=f"girsanov direct theta={theta} lam={lam} a={a}")
    r_rew = mean_compare(terms, target, step,
                         name=f"girsanov reweighted theta={theta} lam={lam} a={a}")
    r_rew.n_effective = ess
    r_rew.details.update(ess=ess, ess_fraction=ess / n_paths,
                         max_log_weight=float(log_w.max()))
    if ess < ess_floor * n_paths:
        r_rew.details["ess_collapse"] = True
        r_rew.passed = False
    return [r_direct, r_rew]
