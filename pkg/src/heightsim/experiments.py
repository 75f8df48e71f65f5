"""Experiment configurations and the statistical checks they run.

Each ``*_check`` function simulates what it needs from its own seeded
streams (see :mod:`heightsim.rng`) and returns a list of TestResult.  The
acceptance suite and :func:`run_experiment` are thin layers over them.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import integrate

from .csbp import (BranchingParams, csbp_path, csbp_transition_sample, extinction_probability,
                   u_closed, u_ode)
from .heightfield import (girsanov_check, laplace_tolerance, map_paths, occupation_integral,
                          ray_knight_field)
from .pathops import project, stop_at_local_time
from .pruning import exit_local_time, kept_time, mark_replay, prune, prune_stopped
from .reflected_bm import (GridPath, ReflectedBmConfig, simulate_reflected, stationary_cdf,
                           stationary_density, tanaka_residual)
from .rng import BROWNIAN, MARKS, stream
from .stats import (TestResult, diff_compare, identity_check, ks_2sample, ks_test,
                    laplace_compare, mean_compare)

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "run_experiment",
    "occupation_target",
    "tanaka_tolerance",
    "field_sweep",
    "ray_knight_checks",
    "projection_marginal_check",
    "composition_check",
    "field_projection_check",
    "occupation_check",
    "pruned_marginal_check",
    "exit_local_time_check",
    "extinction_check",
    "ode_oracle_check",
    "sampler_laplace_check",
    "stationary_check",
    "tanaka_check",
]

log = logging.getLogger("heightsim")

KINDS = ("ray_knight", "projection", "pruning", "occupation", "girsanov", "extinction",
         "stationary")


@dataclass
class ExperimentConfig:
    kind: str
    theta: float = 0.0
    gamma: float = 0.0
    a: float = 1.0
    b: float | None = None
    x: float = 1.0
    lambdas: tuple = (0.5, 1.0, 2.0)
    levels: tuple = (0.5, 1.0)
    dt: float = 1e-4
    epsilon: float | None = None
    n_paths: int = 10_000
    seed: int = 0
    out: str | None = None
    t: float = 5.0
    horizon: float = 20.0
    csbp_step: float = 1.0
    workers: int = 1
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        self.lambdas = tuple(float(v) for v in np.atleast_1d(self.lambdas))
        self.levels = tuple(float(v) for v in np.atleast_1d(self.levels))
        if int(self.n_paths) < 100:
            raise ValueError("n_paths must be >= 100")
        self.n_paths = int(self.n_paths)
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.a > 0:
            raise ValueError("a must be > 0")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not self.x > 0:
            raise ValueError("x must be > 0")
        if self.b is not None and not 0 < self.b <= self.a:
            raise ValueError(f"b must lie in (0, a={self.a}]")
        if any(r < 0 or r > self.a for r in self.levels):
            raise ValueError(f"levels must lie in [0, a={self.a}]")
        if any(v < 0 for v in self.lambdas):
            raise ValueError("lambdas must be >= 0")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not (self.t > 0 and self.horizon > 0 and self.csbp_step > 0):
            raise ValueError("t, horizon and csbp_step must be > 0")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")

    @property
    def eps(self) -> float:
        return 0.02 * self.a if self.epsilon is None else float(self.epsilon)

    def reflected(self, theta: float | None = None, a: float | None = None) -> ReflectedBmConfig:
        return ReflectedBmConfig(self.theta if theta is None else theta,
                                 self.a if a is None else a, self.dt, self.max_steps)

    @classmethod
    def from_mapping(cls, data: dict, **overrides) -> "ExperimentConfig":
        """Build from a flat key-value mapping; ``lambda``/``eps``/``paths`` are accepted aliases."""
        aliases = {"lambda": "lambdas", "eps": "epsilon", "paths": "n_paths"}
        merged = {aliases.get(k, k): v for k, v in dict(data).items()}
        merged.update({aliases.get(k, k): v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**merged)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas"] = list(self.lambdas)
        d["levels"] = list(self.levels)
        d["epsilon"] = self.eps
        return d


# ---------------------------------------------------------------- helpers

def occupation_target(theta: float, a: float, x: float, power: int = 0) -> float:
    """x * int_0^a r^power exp(-4 theta r) dr for power 0 or 1."""
    k = 4.0 * theta
    if abs(k * a) < 1e-12:
        return x * a ** (power + 1) / (power + 1)
    if power == 0:
        return x * -math.expm1(-k * a) / k
    if power == 1:
        return x * (1.0 - math.exp(-k * a) * (1.0 + k * a)) / (k * k)
    raise ValueError("power must be 0 or 1")


def tanaka_tolerance(path: GridPath) -> float:
    """Rounding bound for the Tanaka bookkeeping of one path.

    Recursive summation of n terms errs by at most ~n * eps * (largest
    partial sum); the terms here are the path, the noise, the drift and the
    two regulators.
    """
    n = max(path.n_steps, 1)
    scale = path.a + float(np.max(np.abs(np.cumsum(path.increments)), initial=0.0))
    scale += abs(2.0 * (path.theta or 0.0) * path.dt * n) + path.reg0[-1] + path.regA[-1]
    return 4.0 * n * np.finfo(float).eps * scale


def _tanaka_ratio(path: GridPath) -> float:
    return tanaka_residual(path) / tanaka_tolerance(path)


def _stack(rows: list[dict]) -> dict:
    return {k: np.array([r[k] for r in rows]) for k in rows[0]}


def _expected_keep_fraction(theta: float, gamma: float, a: float) -> float:
    """Stationary probability that the lineage of the current point is unmarked."""
    val, _ = integrate.quad(lambda y: stationary_density(theta, a, y) * math.exp(-4 * gamma * y),
                            0.0, a)
    return val


def _index_of(t: float, dt: float) -> int:
    return int(math.floor(t / dt + 1e-9))


# ---------------------------------------------------------------- sweeps

def field_sweep(theta: float, a: float, x: float, levels, epsilon: float, dt: float,
                n: int, seed: int, tag: str, gamma: float = 0.0, b: float | None = None,
                proj_levels=None, workers: int = 1, max_steps: int = 50_000_000) -> dict:
    """Per-path summaries of stopped paths (pruned ones when gamma > 0).

    Keys: z (fields at ``levels``), L0, T, tanaka (residual / rounding bound
    of the base path), and with ``b`` the largest per-path difference between
    the field at barrier a and the field of the projection to b, over
    ``proj_levels`` (default: the levels below b).
    """
    cfg = ReflectedBmConfig(theta, a, dt, max_steps)
    levels = np.asarray(levels, dtype=float)
    if b is not None:
        low = levels[levels < b] if proj_levels is None else np.asarray(proj_levels, dtype=float)

    def one(i):
        rb = stream(seed, tag, i, BROWNIAN)
        if gamma > 0:
            stopped, path, _ = prune_stopped(cfg, gamma, x, rb, stream(seed, tag, i, MARKS))
        else:
            stopped = path = stop_at_local_time(cfg, x, rb)
        field_ = ray_knight_field(path, levels, epsilon)
        row = {"z": field_.z, "L0": 2.0 * path.reg0[-1], "T": path.horizon,
               "tanaka": _tanaka_ratio(stopped)}
        if b is not None:
            z_a = ray_knight_field(path, low, epsilon).z
            z_b = ray_knight_field(project(path, b), low, epsilon).z
            row["proj_dev"] = float(np.max(np.abs(z_a - z_b), initial=0.0))
            row["proj_unit"] = dt / epsilon
        return row

    t0 = time.perf_counter()
    out = _stack(map_paths(one, n, workers))
    log.info("field sweep %s: %d paths in %.1fs", tag, n, time.perf_counter() - t0)
    return out


# ---------------------------------------------------------------- checks

def ray_knight_checks(params: BranchingParams, z: np.ndarray, levels, lambdas, x: float,
                      epsilon: float, a: float, dt: float, label: str = "ray-knight",
                      mass: float | None = None) -> list[TestResult]:
    """Laplace transform of each field column against exp(-x u(lam, r)).

    ``z`` has one column per level.  Level 0 and the barrier level are read
    off the regulators, so they carry no band bias.
    """
    out = []
    levels = [float(r) for r in levels]
    for lam in lambdas:
        for j, r in enumerate(levels):
            target = math.exp(-x * u_closed(params, lam, r))
            exact = r == 0.0 or r == a
            band, step = laplace_tolerance(params, x, lam, r, epsilon, a, dt, exact_level=exact)
            res = laplace_compare(
                z[:, j], lam, target, band + step,
                name=f"{label} theta={params.theta:g} lam={lam:g} r={r:g}",
                details={"lambda": lam, "level": r, "band_bias": band, "step_bias": step,
                         "epsilon": epsilon, "dt": dt})
            out.append(res)
    return out


def field_projection_check(sweep: dict, label: str) -> TestResult:
    """Per-path agreement of the fields at barrier a and after projection to b.

    The tolerance is the resolution of the band estimator, one grid sample
    (dt / epsilon).
    """
    dev = float(np.max(sweep["proj_dev"]))
    unit = float(sweep["proj_unit"][0])
    return identity_check(dev, unit, label, n=len(sweep["proj_dev"]),
                          details={"band_resolution": unit})


def projection_marginal_check(theta: float, a: float, b: float, t: float, dt: float, n: int,
                              seed: int, workers: int = 1) -> list[TestResult]:
    """KS between the time-t marginal of project(H^{theta,a}, b) and H^{theta,b}."""
    if b == a:
        return [identity_check(0.0, 0.0, f"projection theta={theta:g} b=a is the identity")]
    m = _index_of(t, dt)
    frac = float(stationary_cdf(theta, a, b))
    cfg_a = ReflectedBmConfig(theta, a, dt, 1 << 40)
    cfg_b = ReflectedBmConfig(theta, b, dt, 1 << 40)
    tag = f"proj-{theta}-{a}-{b}"

    def projected(i):
        n0 = int(1.25 * m / max(frac, 1e-3)) + 1000
        while True:
            p = simulate_reflected(cfg_a, n0, stream(seed, tag, i, BROWNIAN))
            q = project(p, b)
            if q.n_steps >= m:
                return q.values[m]
            n0 *= 2

    def direct(i):
        return simulate_reflected(cfg_b, m, stream(seed, tag + "-direct", i, BROWNIAN)).values[-1]

    xs = np.array(map_paths(projected, n, workers))
    ys = np.array(map_paths(direct, n, workers))
    return [ks_2sample(xs, ys, name=f"projection law theta={theta:g} a={a:g} b={b:g} t={t:g}",
                       details={"dt": dt, "n": n})]


def composition_check(n_paths: int, seed: int) -> TestResult:
    """pi_{a,c} = pi_{b,c} o pi_{a,b} on randomised grid paths.

    Values and lower regulators must agree exactly; the rebuilt upper
    regulators agree up to summation order.
    """
    worst = 0.0
    exact = True
    for i in range(n_paths):
        rng = stream(seed, "composition", i)
        a = rng.uniform(0.5, 3.0)
        dt = a * a * rng.uniform(1e-4, 1e-2)
        cfg = ReflectedBmConfig(rng.uniform(-1.0, 1.0), a, dt)
        p = simulate_reflected(cfg, int(rng.integers(1, 4000)), rng)
        b, c = np.sort(rng.uniform(0.05 * a, a, 2))[::-1]
        one = project(p, c)
        two = project(project(p, b), c)
        exact &= np.array_equal(one.values, two.values) and np.array_equal(one.reg0, two.reg0)
        worst = max(worst, float(np.max(np.abs(one.regA - two.regA))))
    res = identity_check(worst if exact else math.inf, 1e-12,
                         "projection composition identity", n=n_paths,
                         details={"values_exact": bool(exact), "regA_max_dev": worst})
    return res


def occupation_check(theta: float, a: float, x: float, dt: float, n: int, seed: int,
                     workers: int = 1) -> list[TestResult]:
    """E[int_0^{T_x} g(H_s) ds] against x int_0^a exp(-4 theta r) g(r) dr, g = 1 and g = r."""
    cfg = ReflectedBmConfig(theta, a, dt, 1 << 40)

    def one(i):
        p = stop_at_local_time(cfg, x, stream(seed, f"occupation-{theta}-{a}", i, BROWNIAN))
        return occupation_integral(p, np.ones_like), occupation_integral(p, lambda v: v)

    vals = np.array(map_paths(one, n, workers))
    out = []
    for j, (gname, power) in enumerate((("1", 0), ("r", 1))):
        target = occupation_target(theta, a, x, power)
        out.append(mean_compare(vals[:, j], target, 0.0,
                                name=f"occupation g={gname} theta={theta:g} a={a:g}",
                                details={"dt": dt, "n": n}))
    return out


def pruned_marginal(cfg: ReflectedBmConfig, gamma: float, t: float, seed: int, tag: str,
                    i: int) -> float:
    """Value of the pruned path at pruned time t (base simulated long enough)."""
    m = _index_of(t, cfg.dt)
    frac = _expected_keep_fraction(cfg.theta, gamma, cfg.a)
    n0 = int(1.25 * m / max(frac, 1e-3)) + 1000
    while True:
        base = simulate_reflected(cfg, n0, stream(seed, tag, i, BROWNIAN))
        marked = mark_replay(base, gamma, stream(seed, tag, i, MARKS))
        kept = marked.kept_index
        if kept.size > m:
            return float(prune(marked).values[m])
        n0 *= 2


def pruned_marginal_check(theta: float, gamma: float, a: float, t: float, dt: float, n: int,
                          seed: int, workers: int = 1) -> list[TestResult]:
    """KS between the pruned marginal at time t and a direct H^{theta+gamma,a} marginal."""
    cfg = ReflectedBmConfig(theta, a, dt, 1 << 40)
    direct_cfg = ReflectedBmConfig(theta + gamma, a, dt, 1 << 40)
    tag = f"pruned-marginal-{theta}-{gamma}-{a}"
    m = _index_of(t, dt)
    xs = np.array(map_paths(lambda i: pruned_marginal(cfg, gamma, t, seed, tag, i), n, workers))
    ys = np.array(map_paths(
        lambda i: simulate_reflected(direct_cfg, m, stream(seed, tag + "-direct", i, BROWNIAN)).values[-1],
        n, workers))
    return [ks_2sample(xs, ys, name=f"pruning law theta={theta:g} gamma={gamma:g} a={a:g} t={t:g}",
                       details={"dt": dt, "n": n})]


def exit_local_time_check(theta: float, gamma: float, a: float, x: float, epsilon: float,
                          dt: float, n: int, seed: int, workers: int = 1) -> list[TestResult]:
    """Band-estimated exit local time from {no mark} against 4 gamma times the kept time."""
    cfg = ReflectedBmConfig(theta, a, dt, 1 << 40)
    tag = f"exit-{theta}-{gamma}-{a}"

    def one(i):
        _, _, marked = prune_stopped(cfg, gamma, x, stream(seed, tag, i, BROWNIAN),
                                     stream(seed, tag, i, MARKS))
        return exit_local_time(marked, epsilon), 4.0 * gamma * kept_time(marked)

    vals = np.array(map_paths(one, n, workers))
    res = diff_compare(vals[:, 0], vals[:, 1],
                       name=f"exit local time = 4 gamma A, theta={theta:g} gamma={gamma:g}",
                       details={"mean_exit": float(vals[:, 0].mean()),
                                "mean_4gammaA": float(vals[:, 1].mean()),
                                "epsilon": epsilon, "dt": dt})
    return [res]


def extinction_check(theta: float, x: float, horizon: float, step: float, n: int,
                     seed: int) -> list[TestResult]:
    """Absorption frequency of exact CSBP chains by ``horizon``."""
    params = BranchingParams(theta)
    dead = np.array([csbp_path(params, x, horizon, step, stream(seed, f"extinction-{theta}", i)).absorbed
                     for i in range(n)], dtype=float)
    return [mean_compare(dead, extinction_probability(params, x), 0.0,
                         name=f"extinction theta={theta:g} x={x:g} horizon={horizon:g}",
                         details={"step": step})]


def ode_oracle_check(thetas=(-1.0, -0.5, 0.0, 0.5, 1.0), lambdas=(0.1, 1.0, 10.0),
                     ts=(0.1, 1.0, 2.0), dt_ode: float = 1e-4) -> list[TestResult]:
    worst = 0.0
    for th in thetas:
        p = BranchingParams(th)
        for lam in lambdas:
            for t in ts:
                worst = max(worst, abs(u_closed(p, lam, t) - u_ode(p, lam, t, dt_ode)))
    return [identity_check(worst, 1e-6, "u_closed vs RK4", n=len(thetas) * len(lambdas) * len(ts))]


def sampler_laplace_check(n: int, seed: int, thetas=(-1.0, -0.5, 0.0, 0.5, 1.0),
                          lambdas=(0.1, 1.0, 10.0), ss=(0.1, 1.0, 2.0),
                          z: float = 1.0) -> list[TestResult]:
    """Exact sampler against exp(-z u(lam, s)); one sample of size n per (theta, s)."""
    out = []
    for th in thetas:
        p = BranchingParams(th)
        for s in ss:
            draws = csbp_transition_sample(p, z, s, stream(seed, "sampler", f"{th}", f"{s}"), size=n)
            for lam in lambdas:
                out.append(laplace_compare(draws, lam, math.exp(-z * u_closed(p, lam, s)),
                                           name=f"sampler theta={th:g} lam={lam:g} s={s:g}"))
    return out


def stationary_check(theta: float, a: float, t: float, dt: float, n: int, seed: int,
                     workers: int = 1) -> list[TestResult]:
    """KS of the time-t marginal against the stationary law, plus Tanaka on every path."""
    cfg = ReflectedBmConfig(theta, a, dt, 1 << 40)
    m = _index_of(t, dt)

    def one(i):
        p = simulate_reflected(cfg, m, stream(seed, f"stationary-{theta}-{a}", i, BROWNIAN))
        return p.values[-1], _tanaka_ratio(p)

    vals = np.array(map_paths(one, n, workers))
    ks = ks_test(vals[:, 0], lambda v: stationary_cdf(theta, a, v),
                 name=f"stationary law theta={theta:g} a={a:g} t={t:g}", details={"dt": dt})
    return [ks, tanaka_check(vals[:, 1], f"tanaka identity theta={theta:g} a={a:g}")]


def tanaka_check(ratios, label: str) -> TestResult:
    """All residuals within their rounding bounds (ratio <= 1)."""
    ratios = np.asarray(ratios, dtype=float)
    return identity_check(float(ratios.max()), 1.0, label, n=ratios.size,
                          details={"worst_residual_over_bound": float(ratios.max())})


# ---------------------------------------------------------------- orchestration

def _run_ray_knight(cfg: ExperimentConfig) -> tuple[list[TestResult], dict]:
    levels = list(cfg.levels)
    sweep = field_sweep(cfg.theta, cfg.a, cfg.x, levels, cfg.eps, cfg.dt, cfg.n_paths, cfg.seed,
                        f"ray-knight-{cfg.theta}-{cfg.a}", gamma=cfg.gamma, b=cfg.b,
                        workers=cfg.workers, max_steps=cfg.max_steps)
    params = BranchingParams(cfg.theta + cfg.gamma)
    label = "pruned ray-knight" if cfg.gamma > 0 else "ray-knight"
    results = ray_knight_checks(params, sweep["z"], levels, cfg.lambdas, cfg.x, cfg.eps, cfg.a,
                                cfg.dt, label)
    results.append(tanaka_check(sweep["tanaka"], "tanaka identity"))
    if cfg.b is not None:
        results.append(field_projection_check(sweep, f"field projection a={cfg.a:g} -> b={cfg.b:g}"))
    z = sweep["z"]
    field_rows = [[r, float(z[:, j].mean()), float(z[:, j].std(ddof=1) / math.sqrt(len(z))),
                   cfg.x * math.exp(-4 * (cfg.theta + cfg.gamma) * r)] for j, r in enumerate(levels)]
    tables = {"field_mean": (["level", "mean_z", "se", "x_exp_minus_4theta_r"], field_rows),
              "field": (["level", "z"], [[r, float(z[0, j])] for j, r in enumerate(levels)])}
    return results, tables


def _run_projection(cfg: ExperimentConfig):
    b = cfg.a / 2 if cfg.b is None else cfg.b
    results = projection_marginal_check(cfg.theta, cfg.a, b, cfg.t, cfg.dt, cfg.n_paths,
                                        cfg.seed, cfg.workers)
    results.append(composition_check(min(cfg.n_paths, 1000), cfg.seed))
    return results, {}


def _run_pruning(cfg: ExperimentConfig):
    results = pruned_marginal_check(cfg.theta, cfg.gamma, cfg.a, cfg.t, cfg.dt, cfg.n_paths,
                                    cfg.seed, cfg.workers)
    rk, tables = _run_ray_knight(cfg)
    results += rk
    results += exit_local_time_check(cfg.theta, cfg.gamma, cfg.a, cfg.x, cfg.eps, cfg.dt,
                                     cfg.n_paths, cfg.seed, cfg.workers)
    return results, tables


def _run_occupation(cfg: ExperimentConfig):
    return occupation_check(cfg.theta, cfg.a, cfg.x, cfg.dt, cfg.n_paths, cfg.seed, cfg.workers), {}


def _run_girsanov(cfg: ExperimentConfig):
    base = ReflectedBmConfig(0.0, cfg.a, cfg.dt, cfg.max_steps)
    results = []
    for lam in cfg.lambdas:
        results += girsanov_check(base, cfg.theta, lam, cfg.x, cfg.n_paths, cfg.seed, cfg.workers)
    return results, {}


def _run_extinction(cfg: ExperimentConfig):
    return extinction_check(cfg.theta, cfg.x, cfg.horizon, cfg.csbp_step, cfg.n_paths, cfg.seed), {}


def _run_stationary(cfg: ExperimentConfig):
    return stationary_check(cfg.theta, cfg.a, cfg.t, cfg.dt, cfg.n_paths, cfg.seed, cfg.workers), {}


_RUNNERS = {
    "ray_knight": _run_ray_knight,
    "projection": _run_projection,
    "pruning": _run_pruning,
    "occupation": _run_occupation,
    "girsanov": _run_girsanov,
    "extinction": _run_extinction,
    "stationary": _run_stationary,
}


def run_experiment(cfg: ExperimentConfig):
    """Run one experiment; writes report.json and CSV tables when ``cfg.out`` is set."""
    from .report import ExperimentReport

    t0 = time.perf_counter()
    results, tables = _RUNNERS[cfg.kind](cfg)
    report = ExperimentReport(cfg.to_dict(), cfg.seed, results, tables,
                              runtime=time.perf_counter() - t0)
    if cfg.out:
        report.write(cfg.out)
    return report
