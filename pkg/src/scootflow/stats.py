"""Paired t-test with p-values from the regularized incomplete beta function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from scootflow.errors import DomainError

CF_TOL = 1e-12
CF_MAX_ITER = 300
_TINY = 1e-300


class NoDifferenceError(DomainError):
    """Paired differences have zero variance, so t is undefined."""


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), evaluated with modified Lentz."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise DomainError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"betainc x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the fraction converges fast only below the mean; use symmetry above it
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise DomainError(f"df must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    t2 = t * t
    x, y = df / (df + t2), t2 / (df + t2)
    # near t = 0, x rounds close to 1; work with y = 1 - x computed directly
    if y < x:
        return 1.0 - betainc(0.5, df / 2.0, y)
    return betainc(df / 2.0, 0.5, x)


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_two_tailed(t, df)
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    df: int
    p_two_tailed: float
    n_pairs: int
    mean_difference: float

    def significant(self, level: float = 0.05) -> bool:
        return self.p_two_tailed < level


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-tailed paired t-test on ``a - b``; negative t means b exceeds a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("paired samples must be 1-D and of equal length")
    n = len(a)
    if n < 2:
        raise DomainError("need at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0 or sd <= 1e-15 * max(1.0, abs(mean)):
        raise NoDifferenceError("no difference detectable: paired differences have zero variance")
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, t_two_tailed(t, n - 1), n, mean)
