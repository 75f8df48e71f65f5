"""The ten acceptance criteria as executable checks.

Each ``criterion_k`` returns a :class:`CriterionOutcome`; ``verify_all``
runs them in order.  Sample sizes and step sizes come from
:class:`AcceptanceConfig` so that the same code runs at full scale (the
defaults) and as a quick smoke test.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, replace

from .csbp import BranchingParams
from .experiments import (composition_check, exit_local_time_check, extinction_check,
                          field_projection_check, field_sweep, occupation_check,
                          ode_oracle_check, projection_marginal_check, pruned_marginal_check,
                          ray_knight_checks, sampler_laplace_check, stationary_check,
                          tanaka_check)
from .heightfield import girsanov_check
from .reflected_bm import ReflectedBmConfig
from .stats import TestResult

__all__ = ["AcceptanceConfig", "CriterionOutcome", "CRITERIA", "run_criterion", "verify_all"]

log = logging.getLogger("heightsim")

LAMBDAS = (0.5, 1.0, 2.0)
RK_LEVELS = (0.5, 1.0)
PROJ_LEVELS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class AcceptanceConfig:
    """Scale of the acceptance run.

    ``dt_occupation``, ``dt_exit`` and ``dt_stationary`` are finer than
    ``dt`` because those criteria allow no bias term.  At dt = 1e-4 the
    O(sqrt(dt)) grid bias is comparable to their 3 SE bands, and the clip
    atom at the favoured boundary (mass 0.0162 at |theta| = 0.5) equals the
    KS critical distance for 10^4 paths.
    """

    n_paths: int = 10_000
    n_sampler: int = 100_000
    n_composition: int = 1_000
    n_chains: int = 10_000
    seed: int = 20261016
    dt: float = 1e-4
    dt_occupation: float = 1e-5
    dt_exit: float = 2.5e-6
    dt_stationary: float = 2.5e-5
    pruned_barrier: float = 1.25
    workers: int = 1

    @classmethod
    def quick(cls, n_paths: int = 200, **kw) -> "AcceptanceConfig":
        """A small configuration for smoke tests (coarser grids, few paths)."""
        base = dict(n_paths=n_paths, n_sampler=max(10 * n_paths, 20_000), n_composition=min(n_paths, 100),
                    n_chains=n_paths, dt=1e-3, dt_occupation=1e-3, dt_exit=1e-3,
                    dt_stationary=1e-3)
        base.update(kw)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CriterionOutcome:
    number: int
    title: str
    results: list[TestResult]
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def line(self) -> str:
        n_ok = sum(r.passed for r in self.results)
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} criterion {self.number}: {self.title} "
                f"({n_ok}/{len(self.results)} checks, {self.runtime:.0f}s)")


_SWEEPS: dict = {}


def _rk_sweep(cfg: AcceptanceConfig, theta: float):
    """Stopped H^{theta,2} fields shared by criteria 1 and 3."""
    key = ("rk", theta, cfg.n_paths, cfg.seed, cfg.dt)
    if key not in _SWEEPS:
        levels = sorted(set(RK_LEVELS) | set(PROJ_LEVELS))
        _SWEEPS[key] = (levels, field_sweep(
            theta, 2.0, 1.0, levels, 0.02 * 2.0, cfg.dt, cfg.n_paths, cfg.seed,
            f"acceptance-rk-{theta}", b=1.0, proj_levels=PROJ_LEVELS, workers=cfg.workers))
    return _SWEEPS[key]


def criterion_1(cfg: AcceptanceConfig) -> list[TestResult]:
    out = []
    for theta in (-0.5, 0.0, 0.5):
        levels, sweep = _rk_sweep(cfg, theta)
        cols = [levels.index(r) for r in RK_LEVELS]
        out += ray_knight_checks(BranchingParams(theta), sweep["z"][:, cols], RK_LEVELS, LAMBDAS,
                                 1.0, 0.04, 2.0, cfg.dt)
        out.append(tanaka_check(sweep["tanaka"], f"tanaka identity (stopped, theta={theta:g})"))
    return out


def criterion_2(cfg: AcceptanceConfig) -> list[TestResult]:
    out = []
    for theta in (-0.5, 0.5):
        out += projection_marginal_check(theta, 2.0, 1.0, 5.0, cfg.dt, cfg.n_paths, cfg.seed,
                                         cfg.workers)
    out.append(composition_check(cfg.n_composition, cfg.seed))
    return out


def criterion_3(cfg: AcceptanceConfig) -> list[TestResult]:
    return [field_projection_check(_rk_sweep(cfg, theta)[1],
                                   f"field at a=2 vs projection to b=1, theta={theta:g}")
            for theta in (-0.5, 0.0, 0.5)]


def criterion_4(cfg: AcceptanceConfig) -> list[TestResult]:
    out = []
    for theta in (-0.5, 0.0, 0.5):
        out += occupation_check(theta, 1.0, 1.0, cfg.dt_occupation, cfg.n_paths, cfg.seed,
                                cfg.workers)
    return out


def criterion_5(cfg: AcceptanceConfig) -> list[TestResult]:
    out = pruned_marginal_check(-0.5, 1.0, 1.0, 5.0, cfg.dt, cfg.n_paths, cfg.seed, cfg.workers)
    for theta, gamma, a in ((-0.5, 0.5, 2.0), (-1.0, 1.0, cfg.pruned_barrier)):
        eps = 0.02 * a
        sweep = field_sweep(theta, a, 1.0, RK_LEVELS, eps, cfg.dt, cfg.n_paths, cfg.seed,
                            f"acceptance-pruned-{theta}-{gamma}-{a}", gamma=gamma,
                            workers=cfg.workers)
        out += ray_knight_checks(BranchingParams(theta + gamma), sweep["z"], RK_LEVELS, LAMBDAS,
                                 1.0, eps, a, cfg.dt,
                                 label=f"pruned ray-knight (theta={theta:g}, gamma={gamma:g}, a={a:g})")
    return out


def criterion_6(cfg: AcceptanceConfig) -> list[TestResult]:
    base = ReflectedBmConfig(0.0, 1.0, cfg.dt)
    out = []
    for theta in (-0.5, 0.5):
        out += girsanov_check(base, theta, 1.0, 1.0, cfg.n_paths, cfg.seed, cfg.workers,
                              step_bias=True)
    return out


def criterion_7(cfg: AcceptanceConfig) -> list[TestResult]:
    return extinction_check(-0.5, 1.0, 20.0, 1.0, cfg.n_chains, cfg.seed)


def criterion_8(cfg: AcceptanceConfig) -> list[TestResult]:
    return ode_oracle_check() + sampler_laplace_check(cfg.n_sampler, cfg.seed)


def criterion_9(cfg: AcceptanceConfig) -> list[TestResult]:
    out = []
    for theta in (-0.5, 0.0, 0.5):
        out += stationary_check(theta, 1.0, 5.0, cfg.dt_stationary, cfg.n_paths, cfg.seed,
                                cfg.workers)
    return out


def criterion_10(cfg: AcceptanceConfig) -> list[TestResult]:
    return exit_local_time_check(0.0, 0.5, 1.0, 1.0, 0.02, cfg.dt_exit, cfg.n_paths, cfg.seed,
                                 cfg.workers)


CRITERIA = {
    1: ("Ray-Knight Laplace match", criterion_1),
    2: ("projection law and composition identity", criterion_2),
    3: ("field consistency under projection", criterion_3),
    4: ("occupation identity", criterion_4),
    5: ("pruning law", criterion_5),
    6: ("Girsanov identity", criterion_6),
    7: ("extinction probability", criterion_7),
    8: ("oracle integrity", criterion_8),
    9: ("kernel integrity", criterion_9),
    10: ("exit local time = 4 gamma A", criterion_10),
}


def run_criterion(number: int, cfg: AcceptanceConfig | None = None) -> CriterionOutcome:
    cfg = cfg or AcceptanceConfig()
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    results = fn(cfg)
    out = CriterionOutcome(number, title, results, time.perf_counter() - t0)
    log.info(out.line())
    return out


def verify_all(cfg: AcceptanceConfig | None = None, only=None) -> list[CriterionOutcome]:
    cfg = cfg or AcceptanceConfig()
    numbers = sorted(CRITERIA) if only is None else list(only)
    try:
        return [run_criterion(k, cfg) for k in numbers]
    finally:
        _SWEEPS.clear()


def with_paths(cfg: AcceptanceConfig, n_paths: int) -> AcceptanceConfig:
    return replace(cfg, n_paths=n_paths, n_chains=n_paths)
