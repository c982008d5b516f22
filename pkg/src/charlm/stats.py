"""Welch's and one-sample t-tests, Pearson correlation, Bonferroni
correction, and the Student-t CDF behind their p-values.

The CDF evaluates the regularized incomplete beta function with a Lentz
continued fraction, good to ~1e-12 over the df/t ranges these tests hit.
All p-values are two-sided; sample variance uses the n-1 denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, NumericError


@dataclass(frozen=True)
class TestResult:
    test: str
    statistic: float  # t or r
    df: float
    p_value: float
    two_sided: bool = True

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "df": self.df,
            "p": self.p_value,
            "two_sided": self.two_sided,
        }


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise NumericError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x < 0.0 or x > 1.0:
        raise NumericError(f"betainc argument x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # symmetry switch keeps the continued fraction in its fast region
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise DataError(f"degrees of freedom must be positive, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * betainc_reg(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def two_sided_p(t: float, df: float) -> float:
    p = 2.0 * (1.0 - student_t_cdf(abs(t), df))
    return min(max(p, 0.0), 1.0)


def _mean_var(sample: Sequence[float]) -> tuple[float, float, int]:
    arr = np.asarray(sample, dtype=np.float64)
    n = arr.size
    return float(arr.mean()), float(arr.var(ddof=1)), n


def welch_t(sample_a: Sequence[float], sample_b: Sequence[float]) -> TestResult:
    """Two-sample t-test without the equal-variance assumption."""
    if len(sample_a) < 2 or len(sample_b) < 2:
        raise DataError("welch_t needs at least 2 observations per sample")
    ma, va, na = _mean_var(sample_a)
    mb, vb, nb = _mean_var(sample_b)
    if va == 0.0 and vb == 0.0:
        raise NumericError("degenerate samples: both variances are zero")
    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return TestResult("welch_t", t, df, two_sided_p(t, df))


def one_sample_t(sample: Sequence[float], mu0: float) -> TestResult:
    if len(sample) < 2:
        raise DataError("one_sample_t needs at least 2 observations")
    m, v, n = _mean_var(sample)
    if v == 0.0:
        raise NumericError("degenerate sample: zero variance")
    t = (m - mu0) / math.sqrt(v / n)
    df = n - 1
    return TestResult("one_sample_t", t, df, two_sided_p(t, df))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> TestResult:
    """Sample correlation with the t-based two-sided p-value (df = n - 2)."""
    if len(xs) != len(ys):
        raise DataError("pearson: samples differ in length")
    n = len(xs)
    if n < 3:
        raise DataError("pearson needs at least 3 paired observations")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float((dx * dx).sum())
    sy = float((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        raise NumericError("degenerate sample: zero variance")
    r = float((dx * dy).sum() / math.sqrt(sx * sy))
    r = min(1.0, max(-1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt(df / (1.0 - r * r))
        p = two_sided_p(t, df)
    return TestResult("pearson", r, df, p)


def bonferroni(p_values: Sequence[float], m: int) -> list[float]:
    """p' = min(1, p * m) for m comparisons."""
    if m < 1:
        raise DataError(f"comparison count must be >= 1, got {m}")
    out = []
    for p in p_values:
        if not (0.0 <= p <= 1.0):
            raise DataError(f"p-value {p} outside [0, 1]")
        out.append(min(1.0, p * m))
    return out
