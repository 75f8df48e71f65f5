"""Poisson-mark pruning of a height path.

Marks fall on the tree coded by the path at rate 4*gamma per unit length.
On a grid path the tree length created so far is the cumulative ascent, so a
Poisson process of rate 4*gamma on the cumulative-ascent axis is exactly a
Poisson process on the discrete tree.  A mark created during an ascent sits
on the current lineage until the path descends below it.  A grid point is
kept when its lineage carries no mark, and the pruned path is the base path
read along the kept points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .pathops import stop_at_local_time, subsample
from .reflected_bm import GridPath, ReflectedBmConfig

__all__ = [
    "MarkedPath",
    "mark_positions",
    "mark_replay",
    "replay_positions",
    "thin",
    "prune",
    "prune_stopped",
    "exit_local_time",
    "kept_time",
    "total_ascent",
]

_GAP_BATCH = 1024


@dataclass(frozen=True, eq=False)
class MarkedPath:
    """A base path with its lineage marks and the keep mask.

    ``positions`` are the marks on the cumulative-ascent axis; mark j sits at
    height ``heights[j]``, is created on step ``born[j]`` and removed on step
    ``died[j]`` (-1 while still alive at the end).  ``lowest[k]`` is the
    lowest live mark at point k (NaN when none, i.e. when keep[k]).
    """

    base: GridPath
    gamma: float
    positions: np.ndarray = field(repr=False)
    heights: np.ndarray = field(repr=False)
    born: np.ndarray = field(repr=False)
    died: np.ndarray = field(repr=False)
    keep: np.ndarray = field(repr=False)
    lowest: np.ndarray = field(repr=False)

    @property
    def n_marks(self) -> int:
        return len(self.positions)

    @property
    def kept_index(self) -> np.ndarray:
        return np.flatnonzero(self.keep)

    def as_columns(self) -> dict[str, np.ndarray]:
        cols = self.base.as_columns()
        cols["keep"] = self.keep.astype(np.int8)
        return cols


def total_ascent(path: GridPath) -> float:
    d = np.diff(path.values)
    return float(d[d > 0].sum())


def mark_positions(gamma: float, length: float, rng: np.random.Generator) -> np.ndarray:
    """Points of a rate-4*gamma Poisson process on [0, length].

    Built from exponential gaps drawn in order, so a longer length extends
    the same sequence.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if gamma == 0 or length <= 0:
        return np.zeros(0)
    scale = 1.0 / (4.0 * gamma)
    out = []
    last = 0.0
    while last <= length:
        pts = last + np.cumsum(rng.exponential(scale, _GAP_BATCH))
        out.append(pts)
        last = pts[-1]
    pts = np.concatenate(out)
    return pts[: np.searchsorted(pts, length, side="right")]


def replay_positions(path: GridPath, gamma: float, positions, check: bool = False) -> MarkedPath:
    """Run the mark stack for marks at the given cumulative-ascent positions."""
    positions = np.ascontiguousarray(positions, dtype=float)
    if positions.size and np.any(np.diff(positions) < 0):
        raise ValueError("mark positions must be sorted")
    n = len(path.values)
    m = len(positions)
    heights = np.empty(m)
    born = np.empty(m, dtype=np.int64)
    died = np.empty(m, dtype=np.int64)
    keep = np.empty(n, dtype=np.bool_)
    lowest = np.empty(n)
    _kernels.replay_marks(path.values, positions, check, heights, born, died, keep, lowest)
    return MarkedPath(path, float(gamma), positions, heights, born, died, keep, lowest)


def mark_replay(path: GridPath, gamma: float, rng: np.random.Generator,
                check: bool = False) -> MarkedPath:
    """Lay marks at rate 4*gamma along the path's ascents and track the stack.

    With ``check`` the stack is asserted sorted and below the current height
    after every step.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    positions = mark_positions(gamma, total_ascent(path), rng)
    return replay_positions(path, gamma, positions, check)


def thin(marked: MarkedPath, gamma: float, labels: np.ndarray | np.random.Generator,
         check: bool = False) -> MarkedPath:
    """Keep each mark independently with probability gamma / marked.gamma.

    ``labels`` are per-mark uniforms (or a generator to draw them from); mark
    j survives iff labels[j] < gamma / marked.gamma.  Sharing the labels
    across several gammas couples the thinned mark sets monotonically.
    """
    if not 0 <= gamma <= marked.gamma:
        raise ValueError(f"thinned gamma must lie in [0, {marked.gamma}]")
    if isinstance(labels, np.random.Generator):
        labels = labels.random(marked.n_marks)
    labels = np.asarray(labels)
    if labels.shape != (marked.n_marks,):
        raise ValueError("need one label per mark")
    ratio = gamma / marked.gamma if marked.gamma > 0 else 0.0
    return replay_positions(marked.base, gamma, marked.positions[labels < ratio], check)


def prune(marked: MarkedPath) -> GridPath:
    """The base path read along its kept points, on the same dt grid.

    The pruned path follows the law with drift parameter theta + gamma.
    """
    base = marked.base
    if marked.gamma == 0:
        return base
    theta = None if base.theta is None else base.theta + marked.gamma
    return subsample(base, marked.kept_index, base.a, theta=theta, rebuild=False)


def prune_stopped(cfg: ReflectedBmConfig, gamma: float, x: float,
                  rng: np.random.Generator, mark_rng: np.random.Generator | None = None,
                  check: bool = False):
    """Stop a theta path at local time x, mark it, and prune it.

    Returns (stopped, pruned, marked).  Points at height 0 are always kept,
    so the pruned path has the same local time at 0 as the base path.
    Marks are drawn from ``mark_rng`` (default: ``rng`` after the path).
    """
    stopped = stop_at_local_time(cfg, x, rng)
    marked = mark_replay(stopped, gamma, rng if mark_rng is None else mark_rng, check)
    return stopped, prune(marked), marked


def kept_time(marked: MarkedPath, t: float | None = None) -> float:
    """A(t) = dt * #{k < t/dt : keep[k]}."""
    base = marked.base
    k = base.n_steps if t is None else base.index(t)
    return float(np.count_nonzero(marked.keep[:k])) * base.dt


def exit_local_time(marked: MarkedPath, epsilon: float, t: float | None = None) -> float:
    """Band estimate of the exit local time from the unmarked state.

    Time spent less than eps above the lowest mark h on the lineage, i.e. just
    past the first exit from {no mark}.  As for band_local_time, the band
    [h, h + eps) is intersected with [0, a] and each step is divided by the
    intersected width min(eps, a - h).
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    base = marked.base
    k = base.n_steps if t is None else base.index(t)
    low = marked.lowest[:k]
    gap = base.values[:k] - low
    with np.errstate(invalid="ignore"):
        inside = (gap >= 0) & (gap < epsilon)
    width = np.minimum(epsilon, base.a - low[inside])
    return float(np.sum(base.dt / width))
