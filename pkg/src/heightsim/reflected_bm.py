"""Brownian motion with drift -2*theta reflected in [0, a].

The scheme is a clipped Euler step (a discrete two-sided Skorokhod map):
propose y + N(-2 theta dt, dt), clip into [0, a] and add the clipped amount
to the lower or upper regulator.  The regulators are half the boundary local
times, so L_0 = 2 * reg0 and L_a = 2 * regA.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "ReflectedBmConfig",
    "GridPath",
    "simulate_reflected",
    "band_local_time",
    "band_local_times",
    "band_edges",
    "boundary_local_time",
    "stationary_density",
    "stationary_cdf",
    "tanaka_residual",
]


@dataclass(frozen=True)
class ReflectedBmConfig:
    theta: float
    a: float
    dt: float = 1e-4
    max_steps: int = 20_000_000

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if not self.a > 0:
            raise ValueError(f"barrier a must be > 0, got {self.a!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be a positive integer")
        if self.dt > self.a * self.a / 4:
            warnings.warn(
                f"dt={self.dt} exceeds a^2/4={self.a * self.a / 4}; the clipped "
                "scheme is then dominated by boundary effects",
                RuntimeWarning, stacklevel=3)

    @property
    def drift_step(self) -> float:
        return -2.0 * self.theta * self.dt

    @property
    def sd_step(self) -> float:
        return math.sqrt(self.dt)


@dataclass(frozen=True, eq=False)
class GridPath:
    """A height path sampled every ``dt``, values in [0, a].

    ``increments[k]`` is the raw Gaussian increment used on step k -> k+1
    (None when the path is not the output of a single driving noise, e.g.
    after pruning).  ``theta`` is the drift parameter of the law the path is
    meant to follow.
    """

    dt: float
    values: np.ndarray
    reg0: np.ndarray
    regA: np.ndarray
    a: float
    theta: float | None = None
    increments: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.values)
        if len(self.reg0) != n or len(self.regA) != n:
            raise ValueError("values, reg0 and regA must have equal length")
        if self.increments is not None and len(self.increments) != n - 1:
            raise ValueError("increments must have length len(values) - 1")

    def __len__(self):
        return len(self.values)

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.values))

    def index(self, t: float) -> int:
        """Grid index of time t, checked against the horizon."""
        k = int(math.floor(t / self.dt + 1e-9))
        if k < 0 or k > self.n_steps:
            raise ValueError(f"t={t} outside the path horizon [0, {self.horizon}]")
        return k

    def local_time_at_end(self, which: str = "lower") -> float:
        return boundary_local_time(self, which, self.horizon)

    def as_columns(self) -> dict[str, np.ndarray]:
        return {"t": self.times, "value": self.values, "reg0": self.reg0, "regA": self.regA}


def simulate_reflected(cfg: ReflectedBmConfig, n_steps: int,
                       rng: np.random.Generator) -> GridPath:
    """Simulate n_steps clipped Euler steps from Y_0 = 0."""
    n_steps = int(n_steps)
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if n_steps > cfg.max_steps:
        raise ValueError(f"n_steps={n_steps} exceeds max_steps={cfg.max_steps}")
    if cfg.a <= cfg.sd_step:
        warnings.warn("barrier narrower than one step's standard deviation",
                      RuntimeWarning, stacklevel=2)
    xi = rng.standard_normal(n_steps)
    xi *= cfg.sd_step
    values = np.empty(n_steps + 1)
    reg0 = np.empty(n_steps + 1)
    rega = np.empty(n_steps + 1)
    values[0] = reg0[0] = rega[0] = 0.0
    if n_steps:
        _kernels.reflect_steps(xi, cfg.drift_step, float(cfg.a), 0.0, 0.0, 0.0,
                               values[1:], reg0[1:], rega[1:], -1.0)
    return GridPath(cfg.dt, values, reg0, rega, float(cfg.a), cfg.theta, xi)


def band_edges(level: float, epsilon: float, a: float) -> tuple[float, float]:
    """[level - eps/2, level + eps/2] intersected with [0, a]."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if level < 0 or level > a:
        raise ValueError(f"level {level} outside [0, {a}]")
    return max(0.0, level - epsilon / 2), min(a, level + epsilon / 2)


def band_local_times(path: GridPath, levels, epsilon: float, t: float | None = None) -> np.ndarray:
    """Occupation-density estimates at several levels (one pass over the path).

    Each estimate is dt * #{k < t/dt : value_k in band} / band width, the band
    being clipped to [0, a] (half width at the boundaries).
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    k = path.n_steps if t is None else path.index(t)
    edges = np.array([band_edges(r, epsilon, path.a) for r in levels]).reshape(-1, 2)
    lo = np.ascontiguousarray(edges[:, 0])
    hi = np.ascontiguousarray(edges[:, 1])
    counts = _kernels.band_counts(path.values, k, lo, hi)
    return counts * path.dt / (hi - lo)


def band_local_time(path: GridPath, level: float, epsilon: float, t: float) -> float:
    return float(band_local_times(path, [level], epsilon, t)[0])


def boundary_local_time(path: GridPath, which: str, t: float) -> float:
    """L_0(t) = 2*reg0(t) ("lower") or L_a(t) = 2*regA(t) ("upper")."""
    k = path.index(t)
    if which == "lower":
        return 2.0 * float(path.reg0[k])
    if which == "upper":
        return 2.0 * float(path.regA[k])
    raise ValueError(f"which must be 'lower' or 'upper', got {which!r}")


def tanaka_residual(path: GridPath) -> float:
    """max_n |Y_n - (sum xi - 2 theta n dt + reg0_n - regA_n)|.

    The discrete Skorokhod bookkeeping makes this zero up to rounding.
    """
    if path.increments is None or path.theta is None:
        raise ValueError("path carries no driving increments")
    n = np.arange(len(path.values))
    beta = np.concatenate(([0.0], np.cumsum(path.increments)))
    rebuilt = beta - 2.0 * path.theta * path.dt * n + path.reg0 - path.regA
    return float(np.max(np.abs(path.values - rebuilt)))


def stationary_density(theta: float, a: float, x):
    """Invariant density of the reflected process: normalised exp(-4 theta x) on [0, a]."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > a)):
        raise ValueError(f"x outside [0, {a}]")
    k = 4.0 * theta
    if abs(k * a) < 1e-12:
        out = np.full_like(x, 1.0 / a)
    else:
        out = k * np.exp(-k * x) / -np.expm1(-k * a)
    return float(out) if out.ndim == 0 else out


def stationary_cdf(theta: float, a: float, x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, a)
    k = 4.0 * theta
    if abs(k * a) < 1e-12:
        out = x / a
    else:
        out = np.expm1(-k * x) / np.expm1(-k * a)
    return float(out) if out.ndim == 0 else out
