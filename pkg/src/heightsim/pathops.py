"""Time changes of grid paths: the clock below a level, the projection onto
[0, b], and stopping when the local time at 0 passes x."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .reflected_bm import GridPath, ReflectedBmConfig

__all__ = [
    "Clock",
    "MaxStepsExceeded",
    "clock_below",
    "time_below",
    "project",
    "subsample",
    "stop_at_local_time",
]

_FIRST_CHUNK = 2048
_MAX_CHUNK = 1 << 20


class MaxStepsExceeded(RuntimeError):
    """The step budget ran out before the local time at 0 reached x.

    This signals an under-provisioned budget: the stopping time is a.s.
    finite for the process reflected in [0, a].
    """

    def __init__(self, partial: GridPath, local_time: float, target: float):
        self.partial = partial
        self.local_time = local_time
        self.target = target
        super().__init__(
            f"max_steps={partial.n_steps} reached with L_0={local_time:.6g} "
            f"< x={target:.6g}")


@dataclass(frozen=True)
class Clock:
    """A_k = dt * #{j < k : value_j <= b}: time spent below b before step k."""

    dt: float
    A: np.ndarray
    kept: np.ndarray

    def inverse(self, m):
        """Grid index of the m-th sample counted by the clock (C at time m*dt)."""
        return self.kept[m]


def clock_below(path: GridPath, b: float) -> Clock:
    below = path.values <= b
    A = np.concatenate(([0.0], np.cumsum(below) * path.dt))
    return Clock(path.dt, A, np.flatnonzero(below))


def time_below(path: GridPath, b: float, t: float) -> float:
    """dt times the number of grid points s <= t with value <= b."""
    k = path.index(t)
    return float(np.count_nonzero(path.values[: k + 1] <= b)) * path.dt


def subsample(path: GridPath, idx: np.ndarray, barrier: float,
              theta: float | None = None, rebuild: bool = True) -> GridPath:
    """Concatenate the samples ``idx`` of ``path`` on the same dt grid.

    The lower regulator is read off at the kept samples.  When the path
    carries its driving noise, the upper regulator at ``barrier`` is rebuilt
    from the spliced path: a spliced step is driven by the raw increment of
    the step leaving the kept sample, and whatever the spliced value falls
    short of is pushing at the barrier.  That keeps the Tanaka bookkeeping
    exact.  This needs every deleted stretch to start with a step above
    ``barrier``.  Otherwise (or with ``rebuild=False``) only upper pushes on
    steps between two consecutive kept samples are carried over.  ``theta``
    overrides the drift parameter recorded on the result.
    """
    idx = np.asarray(idx)
    values = path.values[idx]
    reg0 = path.reg0[idx]
    consecutive = np.diff(idx) == 1
    inc = None
    if rebuild and path.increments is not None and path.theta is not None:
        inc = path.increments[idx[:-1]]
        drift = -2.0 * path.theta * path.dt
        push = values[:-1] + inc + drift + np.diff(reg0) - values[1:]
        push[consecutive] = np.diff(path.regA[idx])[consecutive]
    else:
        push = np.where(consecutive, np.diff(path.regA[idx]), 0.0)
    regA = np.concatenate(([0.0], np.cumsum(push)))
    return GridPath(path.dt, values, reg0, regA, float(barrier),
                    path.theta if theta is None else theta,
                    inc if theta is None else None)


def project(path: GridPath, b: float) -> GridPath:
    """Delete the time spent above b: the grid form of phi o C_phi.

    The result keeps the samples with value <= b in order.  With b equal to
    the path's barrier this is the identity.
    """
    if not 0 < b <= path.a:
        raise ValueError(f"projection level must lie in (0, {path.a}], got {b}")
    if b == path.a:
        return path
    idx = np.flatnonzero(path.values <= b)
    if idx.size == 0:
        raise ValueError("no sample at or below b")
    return subsample(path, idx, b)


def _grow(arr: np.ndarray, size: int) -> np.ndarray:
    out = np.empty(size, dtype=arr.dtype)
    out[: arr.size] = arr
    return out


def stop_at_local_time(cfg: ReflectedBmConfig, x: float, rng: np.random.Generator) -> GridPath:
    """Simulate until the first step at which 2*reg0 exceeds x.

    Normals are drawn in chunks straight into the increment buffer; the
    chunking does not change the path because the generator's normal stream
    is consumed in order.
    """
    if not x > 0:
        raise ValueError(f"x must be > 0, got {x!r}")
    sd = cfg.sd_step
    drift = cfg.drift_step
    a = float(cfg.a)
    y = r0 = ra = 0.0
    cap = _FIRST_CHUNK
    inc = np.empty(cap)
    vals = np.empty(cap + 1)
    g0 = np.empty(cap + 1)
    ga = np.empty(cap + 1)
    vals[0] = g0[0] = ga[0] = 0.0
    total = 0
    chunk = _FIRST_CHUNK
    while True:
        chunk = min(chunk, cfg.max_steps - total)
        if chunk <= 0:
            partial = GridPath(cfg.dt, vals[: total + 1].copy(), g0[: total + 1].copy(),
                               ga[: total + 1].copy(), a, cfg.theta, inc[:total].copy())
            raise MaxStepsExceeded(partial, 2.0 * r0, x)
        if total + chunk > cap:
            cap = max(2 * cap, total + chunk)
            inc = _grow(inc, cap)
            vals, g0, ga = (_grow(arr, cap + 1) for arr in (vals, g0, ga))
        xi = inc[total: total + chunk]
        rng.standard_normal(out=xi)
        xi *= sd
        lo, hi = total + 1, total + 1 + chunk
        k, stopped, y, r0, ra = _kernels.reflect_steps(
            xi, drift, a, y, r0, ra, vals[lo:hi], g0[lo:hi], ga[lo:hi], x)
        total += k
        if stopped:
            break
        chunk = min(chunk + chunk // 2, _MAX_CHUNK)
    n = total + 1
    return GridPath(cfg.dt, vals[:n], g0[:n], ga[:n], a, cfg.theta, inc[:total])
