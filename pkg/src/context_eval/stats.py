"""Correlation, t-distribution tail and kernel density primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = ["betainc", "t_two_sided_p", "PearsonResult", "pearson", "pearson_columns", "KdeCurve", "scott_bandwidth", "kde"]

_EPS = 1e-16
_TINY = 1e-300
_MAXIT = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float, *, complement_x: float | None = None) -> float:
    """Regularized incomplete beta function I_x(a, b).

    ``complement_x`` may carry 1 - x computed without cancellation.
    """
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc needs 0 <= x <= 1")
    y = 1.0 - x if complement_x is None else complement_x
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(y)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, y) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    t2 = t * t
    return betainc(df / 2.0, 0.5, df / (df + t2), complement_x=t2 / (df + t2))


class PearsonResult(NamedTuple):
    r: float
    p_value: float


def _r_p(r: float, n: int) -> float:
    df = n - 2
    one_minus_r2 = (1.0 - r) * (1.0 + r)
    if one_minus_r2 <= 0.0:
        return 0.0
    # t^2 = r^2 df / (1 - r^2), so df / (df + t^2) = 1 - r^2
    return min(1.0, betainc(df / 2.0, 0.5, one_minus_r2, complement_x=r * r))


def pearson_columns(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pearson r and two-sided p of each column of ``X`` against ``y``.

    Undefined entries (n < 3, or a constant column or ``y``) are NaN.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError("x and y must have equal length")
    r = np.full(k, np.nan)
    p = np.full(k, np.nan)
    if n < 3 or np.ptp(y) == 0:
        return r, p
    ok = np.ptp(X, axis=0) > 0
    if not ok.any():
        return r, p
    dx = X[:, ok] - X[:, ok].mean(axis=0)
    dy = y - y.mean()
    sxy = dy @ dx
    sxx = np.einsum("ij,ij->j", dx, dx)
    syy = dy @ dy
    rr = np.clip(sxy / np.sqrt(sxx * syy), -1.0, 1.0)
    r[ok] = rr
    p[ok] = [_r_p(v, n) for v in rr.tolist()]
    return r, p


def pearson(x, y) -> PearsonResult:
    """Pearson correlation with a two-sided t-test p-value (n - 2 dof).

    Raises ``ValueError("undefined correlation")`` for constant input and
    when fewer than three pairs are given.

    >>> pearson([1, 2, 3], [2, 4, 6]).r
    1.0
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    if x.size < 3:
        raise ValueError("undefined correlation: need at least 3 pairs")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("undefined correlation: constant input")
    r, p = pearson_columns(x[:, None], y)
    return PearsonResult(float(r[0]), float(p[0]))


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


def scott_bandwidth(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float(v.std(ddof=1) * v.size ** (-0.2))


def kde(values, grid_size: int = 512) -> KdeCurve:
    """Gaussian kernel density estimate with Scott's-rule bandwidth.

    The grid spans four bandwidths beyond the data range on either side.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 2 or np.ptp(v) == 0:
        raise ValueError("degenerate KDE: need at least 2 distinct values")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    h = scott_bandwidth(v)
    if not (h > 0 and math.isfinite(h)):
        raise ValueError("degenerate KDE: bandwidth underflow")
    grid = np.linspace(v.min() - 4 * h, v.max() + 4 * h, grid_size)
    density = np.zeros(grid_size)
    norm = 1.0 / (v.size * h * math.sqrt(2 * math.pi))
    for chunk in np.array_split(v, max(1, v.size // 4096)):
        z = (grid[:, None] - chunk[None, :]) / h
        density += np.exp(-0.5 * z * z).sum(axis=1)
    return KdeCurve(grid, density * norm, h)
