"""Estimators and pass/fail checks used by every experiment."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as _sps

__all__ = [
    "TestResult",
    "Z_BAND",
    "KS_ALPHA",
    "mean_compare",
    "laplace_compare",
    "diff_compare",
    "ks_test",
    "ks_2sample",
    "identity_check",
]

Z_BAND = 3.0
KS_ALPHA = 0.01


@dataclass
class TestResult:
    """One statistical check.

    For mean-type checks ``tolerance = stat_tol + bias_tol`` with
    ``stat_tol = 3 * se`` and pass iff |estimate - target| <= tolerance.
    For KS checks ``estimate`` is the D statistic and pass iff p > 0.01.
    """

    __test__ = False  # not a pytest class

    name: str
    kind: str
    estimate: float
    target: float
    se: float = 0.0
    stat_tol: float = 0.0
    bias_tol: float = 0.0
    tolerance: float = 0.0
    passed: bool = False
    n_effective: float = 0.0
    p_value: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def deviation(self) -> float:
        return abs(self.estimate - self.target)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, (np.floating, np.integer)):
                out[k] = v.item()
            if isinstance(v, np.bool_):
                out[k] = bool(v)
        return out

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        if self.kind == "ks":
            return f"[{flag}] {self.name}: D={self.estimate:.4g} p={self.p_value:.3g} (need p > {KS_ALPHA})"
        if self.kind == "identity":
            return f"[{flag}] {self.name}: max deviation {self.estimate:.3g} <= {self.tolerance:.3g}"
        parts = [f"{k.split('_')[0]} {self.details[k]:.3g}" for k in ("band_bias", "step_bias")
                 if k in self.details]
        bias = f"bias={self.bias_tol:.3g}" + (f" [{' + '.join(parts)}]" if parts else "")
        return (f"[{flag}] {self.name}: est={self.estimate:.5g} target={self.target:.5g} "
                f"|diff|={self.deviation:.3g} tol={self.tolerance:.3g} "
                f"(3SE={self.stat_tol:.3g} + {bias})")


def mean_compare(samples, target: float, bias: float = 0.0, name: str = "mean",
                 weights=None, details=None) -> TestResult:
    """Compare a sample mean with a target at 3 SE + bias."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    n = x.size
    est = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    stat = Z_BAND * se
    tol = stat + float(bias)
    n_eff = float(n)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        n_eff = float(w.sum() ** 2 / np.sum(w * w)) if np.any(w) else 0.0
    ok = abs(est - target) <= tol
    return TestResult(name, "mean", est, float(target), se, stat, float(bias), tol,
                      bool(ok), n_eff, details=dict(details or {}))


def laplace_compare(samples, lam: float, target: float, bias: float = 0.0,
                    name: str | None = None, details=None) -> TestResult:
    """Empirical E[exp(-lam * Z)] against a target value."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    z = np.asarray(samples, dtype=float)
    if z.size == 0:
        raise ValueError("no samples")
    vals = np.exp(-lam * z)
    res = mean_compare(vals, target, bias, name or f"laplace(lam={lam})", details=details)
    if np.all(vals == vals[0]):
        # degenerate sample (lam = 0 or all Z equal): the mean is exact
        res.se = 0.0
        res.stat_tol = 0.0
        res.tolerance = float(bias) + 1e-12
        res.passed = abs(res.estimate - target) <= res.tolerance
    return res


def diff_compare(a, b, bias: float = 0.0, name: str = "paired difference",
                 details=None) -> TestResult:
    """Paired samples: mean of a - b against 0."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return mean_compare(d, 0.0, bias, name, details=details)


def ks_test(samples, cdf, name: str = "ks", details=None) -> TestResult:
    """Two-sided one-sample KS with the asymptotic p-value."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ValueError("KS check needs at least 100 samples")
    res = _sps.kstest(x, cdf, method="asymp")
    return TestResult(name, "ks", float(res.statistic), 0.0, passed=bool(res.pvalue > KS_ALPHA),
                      n_effective=float(x.size), p_value=float(res.pvalue),
                      details=dict(details or {}))


def ks_2sample(x, y, name: str = "ks2", details=None) -> TestResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if min(x.size, y.size) < 100:
        raise ValueError("KS check needs at least 100 samples per side")
    res = _sps.ks_2samp(x, y, method="asymp")
    n_eff = x.size * y.size / (x.size + y.size)
    return TestResult(name, "ks", float(res.statistic), 0.0, passed=bool(res.pvalue > KS_ALPHA),
                      n_effective=float(n_eff), p_value=float(res.pvalue),
                      details=dict(details or {}))


def identity_check(max_dev: float, tolerance: float, name: str, n: int = 0,
                   details=None) -> TestResult:
    """Deterministic check: a maximal deviation against a fixed tolerance."""
    return TestResult(name, "identity", float(max_dev), 0.0, tolerance=float(tolerance),
                      passed=bool(max_dev <= tolerance), n_effective=float(n),
                      details=dict(details or {}))
