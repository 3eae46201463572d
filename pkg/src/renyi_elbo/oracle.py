"""Brute-force numerical oracles for Renyi divergences.

These integrate p^a q^(1-a) directly and never touch the closed forms in
``divergence``; they exist so the closed forms can be checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .divergence import (
    Gaussian1,
    GaussianLike,
    GaussianN,
    OrderLike,
    as_gaussian_n,
    as_order,
)
from .errors import DimensionError

# half-width of the integration window, in pooled standard deviations
WINDOW_STDS = 12.0


@dataclass(frozen=True)
class OracleResult:
    value: float
    error: float
    diverged: bool = False


_DIVERGED = OracleResult(math.inf, math.inf, True)


def _log_normal(y: float, mean: float, var: float) -> float:
    d = y - mean
    return -0.5 * (math.log(2.0 * math.pi * var) + d * d / var)


def _quadrature_1d(g0: Gaussian1, g1: Gaussian1, a: float, limit: int) -> OracleResult:
    # log p^a q^(1-a) is a quadratic in y; if it opens upward the integral diverges
    curvature = a / g0.variance + (1.0 - a) / g1.variance
    if curvature <= 0:
        return _DIVERGED

    def log_integrand(y):
        return a * _log_normal(y, g0.mean, g0.variance) + (1.0 - a) * _log_normal(
            y, g1.mean, g1.variance
        )

    peak = (a * g0.mean / g0.variance + (1.0 - a) * g1.mean / g1.variance) / curvature
    width = math.sqrt(1.0 / curvature)
    pooled = max(g0.std, g1.std)
    lo = min(g0.mean, g1.mean) - WINDOW_STDS * pooled
    hi = max(g0.mean, g1.mean) + WINDOW_STDS * pooled
    lo = min(lo, peak - WINDOW_STDS * width)
    hi = max(hi, peak + WINDOW_STDS * width)

    # rescale by the peak so far-apart pairs do not underflow
    shift = log_integrand(peak)
    value, abserr = integrate.quad(
        lambda y: math.exp(log_integrand(y) - shift),
        lo,
        hi,
        points=[peak],
        epsabs=1e-15,
        epsrel=1e-13,
        limit=limit,
    )
    if not value > 0:
        return _DIVERGED
    log_z = shift + math.log(value)
    return OracleResult(log_z / (a - 1.0), abserr / value / abs(a - 1.0))


def _montecarlo(gi: GaussianN, gj: GaussianN, a: float, samples: int, seed: int) -> OracleResult:
    prec = a * np.linalg.inv(gi.covariance) + (1.0 - a) * np.linalg.inv(gj.covariance)
    if np.linalg.eigvalsh(0.5 * (prec + prec.T))[0] <= 0:
        return _DIVERGED
    rng = np.random.default_rng(seed)
    p = stats.multivariate_normal(gi.mean, gi.covariance)
    q = stats.multivariate_normal(gj.mean, gj.covariance)
    y = p.rvs(size=samples, random_state=rng).reshape(samples, gi.dim)
    # E_p[(q/p)^(1-a)] = integral of p^a q^(1-a)
    log_w = (1.0 - a) * (q.logpdf(y) - p.logpdf(y))
    top = float(log_w.max())
    w = np.exp(log_w - top)
    mean = float(w.mean())
    se = float(w.std(ddof=1)) / math.sqrt(samples)
    return OracleResult((top + math.log(mean)) / (a - 1.0), se / mean / abs(a - 1.0))


def oracle_renyi_divergence(
    gi: GaussianLike,
    gj: GaussianLike,
    order: OrderLike,
    mode: str = "quadrature",
    budget: int = 200,
    seed: int = 0,
) -> OracleResult:
    """Numerically integrate D_a[gi || gj].

    ``mode="quadrature"`` (1-D only) runs adaptive quadrature with at most
    ``budget`` subintervals; ``mode="montecarlo"`` draws ``budget`` samples
    from ``gi``. The returned error is quad's bound or one standard error.
    """
    a = as_order(order).alpha
    if budget <= 0:
        raise ValueError("budget must be positive")
    if mode == "quadrature":
        g0, g1 = as_gaussian_n(gi), as_gaussian_n(gj)
        if g0.dim != 1 or g1.dim != 1:
            raise DimensionError("quadrature oracle is one-dimensional only")
        g0 = Gaussian1(float(g0.mean[0]), float(g0.covariance[0, 0]))
        g1 = Gaussian1(float(g1.mean[0]), float(g1.covariance[0, 0]))
        return _quadrature_1d(g0, g1, a, budget)
    if mode == "montecarlo":
        g0, g1 = as_gaussian_n(gi), as_gaussian_n(gj)
        if g0.dim != g1.dim:
            raise DimensionError(f"dimensions differ: {g0.dim} vs {g1.dim}")
        return _montecarlo(g0, g1, a, int(budget), seed)
    raise ValueError(f"unknown oracle mode {mode!r}")
