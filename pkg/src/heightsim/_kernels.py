"""Compiled inner loops.  Pure functions of their array arguments."""
from __future__ import annotations

import numba as nb
import numpy as np

_JIT = dict(nogil=True, cache=True)


@nb.njit(**_JIT)
def reflect_steps(xi, drift, a, y, r0, ra, values, reg0, rega, stop_at):
    """Clipped Euler steps of a drifted Brownian motion in [0, a].

    Writes the state after each step into values/reg0/rega.  When
    ``stop_at >= 0`` the loop ends after the first step with 2*r0 > stop_at.
    Returns (steps taken, stopped, y, r0, ra).
    """
    n = xi.shape[0]
    for k in range(n):
        z = y + drift + xi[k]
        if z < 0.0:
            r0 -= z
            z = 0.0
        elif z > a:
            ra += z - a
            z = a
        y = z
        values[k] = y
        reg0[k] = r0
        rega[k] = ra
        if stop_at >= 0.0 and 2.0 * r0 > stop_at:
            return k + 1, True, y, r0, ra
    return n, False, y, r0, ra


@nb.njit(**_JIT)
def band_counts(values, n, lo, hi):
    """Number of indices k < n with lo[j] <= values[k] <= hi[j], per band j."""
    m = lo.shape[0]
    out = np.zeros(m, dtype=np.int64)
    for k in range(n):
        v = values[k]
        for j in range(m):
            if lo[j] <= v <= hi[j]:
                out[j] += 1
    return out


@nb.njit(**_JIT)
def replay_marks(values, positions, check, heights, born, died, keep, lowest):
    """Lineage mark stack driven by a height path.

    ``positions`` are sorted mark locations on the cumulative-ascent axis
    (a Poisson process there is a Poisson process on the tree skeleton).
    Ascents consume the marks falling in their ascent interval; descents pop
    every mark above the new height.  Returns (marks used, live at end).
    """
    n = values.shape[0]
    n_pos = positions.shape[0]
    stack = np.empty(n_pos + 1, dtype=np.int64)
    top = 0
    j = 0
    s = 0.0
    keep[0] = True
    lowest[0] = np.nan
    for k in range(1, n):
        h0 = values[k - 1]
        h1 = values[k]
        if h1 > h0:
            s1 = s + (h1 - h0)
            while j < n_pos and positions[j] <= s1:
                m = h0 + (positions[j] - s)
                if m > h1:
                    m = h1
                heights[j] = m
                born[j] = k
                died[j] = -1
                stack[top] = j
                top += 1
                j += 1
            s = s1
        elif h1 < h0:
            while top > 0 and heights[stack[top - 1]] > h1:
                died[stack[top - 1]] = k
                top -= 1
        keep[k] = top == 0
        if top > 0:
            lowest[k] = heights[stack[0]]
        else:
            lowest[k] = np.nan
        if check:
            if top > 0 and heights[stack[top - 1]] > h1:
                raise AssertionError("live mark above the current height")
            for i in range(1, top):
                if not heights[stack[i - 1]] < heights[stack[i]]:
                    raise AssertionError("mark stack not strictly increasing")
    return j, top
