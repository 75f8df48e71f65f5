"""Quadratic branching mechanism and an exact-transition CSBP sampler.

Everything here is closed form or an ODE solve.  The sampler is the
independent reference used by the statistical checks on simulated height
processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BranchingParams",
    "CsbpPath",
    "StepSizeError",
    "THETA_ZERO_SWITCH",
    "psi",
    "u_closed",
    "u_infinity",
    "u_ode",
    "forced_ode",
    "transition_coefficients",
    "csbp_transition_sample",
    "csbp_path",
    "extinction_probability",
]

# Below this |theta| the critical formulas are used; the relative error of
# dropping the O(theta) terms is far below any tolerance used in the package.
THETA_ZERO_SWITCH = 1e-8


class StepSizeError(ArithmeticError):
    """RK4 produced a negative iterate: the step is too coarse for the flow."""


@dataclass(frozen=True)
class BranchingParams:
    """Parameters of psi(u) = 2u^2 + 4*theta*u, plus a pruning intensity."""

    theta: float
    gamma: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta!r}")
        if not (self.gamma >= 0.0):
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")

    @property
    def critical(self) -> bool:
        return abs(self.theta) < THETA_ZERO_SWITCH

    def pruned(self) -> "BranchingParams":
        """Parameters of the process left after pruning at rate 4*gamma."""
        return BranchingParams(self.theta + self.gamma)


@dataclass(frozen=True)
class CsbpPath:
    t0: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0):
            raise ValueError("CSBP values must be nonnegative")
        zero = np.flatnonzero(v == 0.0)
        if zero.size and np.any(v[zero[0]:] != 0.0):
            raise ValueError("a CSBP path must stay at 0 once absorbed")
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.values.size)

    @property
    def absorbed(self) -> bool:
        return bool(self.values[-1] == 0.0)


def _check_nonneg(name, value):
    if np.any(np.asarray(value) < 0):
        raise ValueError(f"{name} must be >= 0, got {value!r}")


def psi(params: BranchingParams, u):
    """Branching mechanism 2u^2 + 4*theta*u (u >= 0)."""
    _check_nonneg("u", u)
    return 2.0 * u * u + 4.0 * params.theta * u


def transition_coefficients(params: BranchingParams, t: float) -> tuple[float, float]:
    """Return (q, c) with u(lam, t) = q*lam / (1 + c*lam).

    q = exp(-4 theta t) and c = (1 - exp(-4 theta t)) / (2 theta), with the
    limit c = 2t at theta = 0.  c > 0 for every theta when t > 0.
    """
    th = params.theta
    if params.critical:
        return 1.0, 2.0 * t
    return math.exp(-4.0 * th * t), -math.expm1(-4.0 * th * t) / (2.0 * th)


def u_closed(params: BranchingParams, lam, t):
    """Closed-form solution of u' = -psi(u), u(0) = lam."""
    _check_nonneg("lambda", lam)
    _check_nonneg("t", t)
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    th = params.theta
    if params.critical:
        out = lam / (1.0 + 2.0 * lam * t)
    else:
        q = np.exp(-4.0 * th * t)
        c = -np.expm1(-4.0 * th * t) / (2.0 * th)
        out = lam * q / (1.0 + lam * c)
    return float(out) if out.ndim == 0 else out


def u_infinity(params: BranchingParams, t: float) -> float:
    """lim_{lam -> inf} u(lam, t); exp(-x u_infinity) is P(Z_t = 0 | Z_0 = x)."""
    if t <= 0:
        return math.inf
    q, c = transition_coefficients(params, t)
    return q / c


def forced_ode(params: BranchingParams, v0: float, forcing: float, t: float,
               dt_ode: float = 1e-4) -> float:
    """RK4 for v' = forcing - psi(v) on [0, t] from v(0) = v0.

    With forcing = 0 this is the backward Laplace exponent flow; a positive
    constant forcing gives the exponent of exp(-forcing * int Z) over a
    level window.
    """
    if dt_ode <= 0:
        raise ValueError("dt_ode must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    th = params.theta

    def f(v):
        return forcing - 2.0 * v * v - 4.0 * th * v

    n = max(1, math.ceil(t / dt_ode - 1e-12))
    h = t / n
    v = float(v0)
    if t == 0:
        return v
    for _ in range(n):
        k1 = f(v)
        k2 = f(v + 0.5 * h * k1)
        k3 = f(v + 0.5 * h * k2)
        k4 = f(v + h * k3)
        v = v + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if v < 0:
            raise StepSizeError(f"negative iterate {v!r}; reduce dt_ode (now {h})")
    return v


def u_ode(params: BranchingParams, lam: float, t: float, dt_ode: float = 1e-4) -> float:
    """Numerical reference for u_closed: classical RK4 on u' = -psi(u)."""
    _check_nonneg("lambda", lam)
    return forced_ode(params, lam, 0.0, t, dt_ode)


def csbp_transition_sample(params: BranchingParams, z, s: float,
                           rng: np.random.Generator, size=None):
    """Exact draw of Z_{t+s} given Z_t = z.

    u(lam, s) = q*lam/(1 + c*lam) is the Laplace exponent of a compound
    Poisson sum: N ~ Poisson(z*q/c) exponentials of mean c.  Then
    E[exp(-lam*Z)] = exp(-z*u(lam, s)) exactly.  ``z`` may be an array.
    """
    _check_nonneg("z", z)
    if not s > 0:
        raise ValueError(f"s must be > 0, got {s!r}")
    q, c = transition_coefficients(params, s)
    z = np.asarray(z, dtype=float)
    if size is not None:
        z = np.broadcast_to(z, size)
    n = rng.poisson(z * (q / c))
    out = np.where(n > 0, rng.gamma(np.maximum(n, 1), c), 0.0)
    return float(out) if out.ndim == 0 else out


def csbp_path(params: BranchingParams, z0: float, horizon: float, step: float,
              rng: np.random.Generator) -> CsbpPath:
    """Chain exact transitions on the grid 0, step, ..., >= horizon."""
    _check_nonneg("z0", z0)
    if not (horizon > 0 and step > 0):
        raise ValueError("horizon and step must be > 0")
    n = math.ceil(horizon / step - 1e-12)
    vals = np.zeros(n + 1)
    vals[0] = z0
    for k in range(n):
        if vals[k] == 0.0:
            break
        vals[k + 1] = csbp_transition_sample(params, vals[k], step, rng)
    return CsbpPath(0.0, step, vals)


def extinction_probability(params: BranchingParams, x: float) -> float:
    """P(extinction | Z_0 = x): 1 if theta >= 0, exp(2 x theta) otherwise."""
    if not x > 0:
        raise ValueError(f"x must be > 0, got {x!r}")
    if params.theta >= 0:
        return 1.0
    return math.exp(2.0 * x * params.theta)
