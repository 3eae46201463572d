"""Entropies, KL and Renyi divergences for discrete and Gaussian families.

Natural logarithms throughout, so every quantity is in nats. Divergences
that are infinite (absolute continuity fails) return ``DIVERGENT`` rather
than raising, which lets sweeps record them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DimensionError,
    InfeasibleOrderError,
    InvalidDistributionError,
    InvalidOrderError,
)

DIVERGENT = math.inf

SUM_TOL = 1e-12
SYMMETRY_RTOL = 1e-12
PD_RTOL = 1e-12


@dataclass(frozen=True)
class RenyiOrder:
    """Divergence order alpha > 0, alpha != 1."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not math.isfinite(a) or a <= 0.0:
            raise InvalidOrderError(f"order must be positive and finite, got {a!r}")
        if a == 1.0:
            raise InvalidOrderError("order 1 is the KL limit; use the KL functions")
        object.__setattr__(self, "alpha", a)

    @property
    def delta(self) -> float:
        """alpha / (1 - alpha)."""
        return self.alpha / (1.0 - self.alpha)

    @property
    def in_unit_interval(self) -> bool:
        return 0.0 < self.alpha < 1.0

    def complement(self) -> "RenyiOrder":
        """The skew-mapped order 1 - alpha (only defined for alpha in (0, 1))."""
        self.require_unit_interval()
        return RenyiOrder(1.0 - self.alpha)

    def require_unit_interval(self) -> None:
        if not self.in_unit_interval:
            raise InvalidOrderError(f"order must lie in (0, 1), got {self.alpha!r}")


OrderLike = Union[RenyiOrder, float]


def as_order(order: OrderLike) -> RenyiOrder:
    return order if isinstance(order, RenyiOrder) else RenyiOrder(order)


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDistributionError("probabilities must be a non-empty vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistributionError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise InvalidDistributionError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, weights) -> "DiscreteDist":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise InvalidDistributionError("weights have zero total mass")
        p = w / total
        # renormalize once more so the sum lands within the tolerance
        return cls(p / p.sum())

    @property
    def support_size(self) -> int:
        return self.probs.size

    def __repr__(self):
        return f"DiscreteDist({self.probs.tolist()!r})"


@dataclass(frozen=True)
class Gaussian1:
    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise InvalidDistributionError(f"variance must be positive, got {self.variance!r}")
        if not math.isfinite(self.mean):
            raise InvalidDistributionError("mean must be finite")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def as_n(self) -> "GaussianN":
        return GaussianN(np.array([self.mean]), np.array([[self.variance]]))


def is_positive_definite(matrix: np.ndarray, rtol: float = PD_RTOL) -> bool:
    """Smallest eigenvalue above ``rtol`` times the largest (symmetric input)."""
    eig = np.linalg.eigvalsh(matrix)
    return bool(eig[-1] > 0 and eig[0] > rtol * eig[-1])


@dataclass(frozen=True, eq=False)
class GaussianN:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.array(self.mean, dtype=float))
        cov = np.atleast_2d(np.array(self.covariance, dtype=float))
        n = mu.size
        if mu.ndim != 1 or cov.shape != (n, n):
            raise DimensionError(f"mean of size {n} incompatible with covariance {cov.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise InvalidDistributionError("non-finite Gaussian parameters")
        scale = np.max(np.abs(cov))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise InvalidDistributionError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if not is_positive_definite(cov):
            raise InvalidDistributionError("covariance is not positive definite")
        mu.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def standard(cls, dim: int) -> "GaussianN":
        return cls(np.zeros(dim), np.eye(dim))

    def logpdf(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        chol = np.linalg.cholesky(self.covariance)
        z = np.linalg.solve(chol, (y - self.mean).T)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (np.sum(z * z, axis=0) + logdet + self.dim * math.log(2 * math.pi))


GaussianLike = Union[Gaussian1, GaussianN]


def as_gaussian_n(g: GaussianLike) -> GaussianN:
    return g.as_n() if isinstance(g, Gaussian1) else g


# -- discrete -----------------------------------------------------------------


def _check_same_support(p: DiscreteDist, q: DiscreteDist) -> None:
    if p.support_size != q.support_size:
        raise DimensionError(
            f"support sizes differ: {p.support_size} vs {q.support_size}"
        )


def shannon_entropy_discrete(p: DiscreteDist) -> float:
    probs = p.probs[p.probs > 0]
    return float(-np.sum(probs * np.log(probs)))


def renyi_entropy_discrete(p: DiscreteDist, order: OrderLike) -> float:
    a = as_order(order).alpha
    probs = p.probs[p.probs > 0]
    return float(np.log(np.sum(probs**a)) / (1.0 - a))


def kl_divergence_discrete(p: DiscreteDist, q: DiscreteDist) -> float:
    _check_same_support(p, q)
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        return DIVERGENT
    pp, qq = p.probs[mask], q.probs[mask]
    return float(np.sum(pp * (np.log(pp) - np.log(qq))))


def _log_power_sum(p: np.ndarray, q: np.ndarray, a: float) -> float:
    """log sum p^a q^(1-a) with 0^x = 0; -inf when the sum vanishes, +inf when it blows up."""
    both = (p > 0) & (q > 0)
    if a > 1 and np.any((p > 0) & (q == 0)):
        return math.inf
    if not np.any(both):
        return -math.inf
    logs = a * np.log(p[both]) + (1.0 - a) * np.log(q[both])
    top = logs.max()
    return float(top + np.log(np.sum(np.exp(logs - top))))


def renyi_divergence_discrete(p: DiscreteDist, q: DiscreteDist, order: OrderLike) -> float:
    _check_same_support(p, q)
    a = as_order(order).alpha
    log_sum = _log_power_sum(p.probs, q.probs, a)
    if math.isinf(log_sum):
        return DIVERGENT
    return log_sum / (a - 1.0)


def mixed_discrete(p: DiscreteDist, q: DiscreteDist, order: OrderLike) -> DiscreteDist:
    """Normalized geometric mixture p^a q^(1-a)."""
    _check_same_support(p, q)
    a = as_order(order).alpha
    both = (p.probs > 0) & (q.probs > 0)
    logs = np.full(p.support_size, -np.inf)
    logs[both] = a * np.log(p.probs[both]) + (1.0 - a) * np.log(q.probs[both])
    if not np.any(both):
        raise InvalidDistributionError("geometric mixture has zero normalizer")
    w = np.exp(logs - logs[both].max())
    return DiscreteDist.normalized(w)


def identity_b1_residual(
    r: DiscreteDist, p: DiscreteDist, q: DiscreteDist, order: OrderLike
) -> float:
    """Residual of  a D[R||P] + (1-a) D[R||Q] = D[R||p_a] + (1-a) D_a[P||Q].

    Infinite divergences on either side propagate as ``DIVERGENT``.
    """
    order = as_order(order)
    a = order.alpha
    p_mix = mixed_discrete(p, q, order)
    terms = [
        kl_divergence_discrete(r, p),
        kl_divergence_discrete(r, q),
        kl_divergence_discrete(r, p_mix),
        renyi_divergence_discrete(p, q, order),
    ]
    if any(math.isinf(t) for t in terms):
        return DIVERGENT
    d_rp, d_rq, d_rmix, d_pq = terms
    return a * d_rp + (1.0 - a) * d_rq - d_rmix - (1.0 - a) * d_pq


# -- Gaussian -----------------------------------------------------------------


def _logdet_pd(matrix: np.ndarray) -> float:
    chol = np.linalg.cholesky(matrix)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _check_same_dim(gi: GaussianN, gj: GaussianN) -> None:
    if gi.dim != gj.dim:
        raise DimensionError(f"dimensions differ: {gi.dim} vs {gj.dim}")


def _renyi_gaussian_scalar(gi: Gaussian1, gj: Gaussian1, a: float) -> float:
    var_star = (1.0 - a) * gi.variance + a * gj.variance
    if not var_star > 0:
        raise InfeasibleOrderError(f"order {a} gives a non-positive combined variance")
    diff = gi.mean - gj.mean
    log_ratio = (
        math.log(var_star) - (1.0 - a) * math.log(gi.variance) - a * math.log(gj.variance)
    )
    return 0.5 * a * diff * diff / var_star - log_ratio / (2.0 * (a - 1.0))


def renyi_divergence_gaussian(gi: GaussianLike, gj: GaussianLike, order: OrderLike) -> float:
    """Closed-form D_a[N_i || N_j].

    Raises InfeasibleOrderError when (1-a) S_i + a S_j is not positive
    definite, which can only happen for a > 1.
    """
    if isinstance(gi, Gaussian1) and isinstance(gj, Gaussian1):
        return _renyi_gaussian_scalar(gi, gj, as_order(order).alpha)
    gi, gj = as_gaussian_n(gi), as_gaussian_n(gj)
    _check_same_dim(gi, gj)
    a = as_order(order).alpha
    s_star = (1.0 - a) * gi.covariance + a * gj.covariance
    if not is_positive_definite(s_star):
        raise InfeasibleOrderError(
            f"order {a} gives a non-positive-definite combined covariance"
        )
    diff = gi.mean - gj.mean
    chol = np.linalg.cholesky(s_star)
    z = np.linalg.solve(chol, diff)
    quad = float(z @ z)
    log_ratio = (
        2.0 * float(np.sum(np.log(np.diag(chol))))
        - (1.0 - a) * _logdet_pd(gi.covariance)
        - a * _logdet_pd(gj.covariance)
    )
    return 0.5 * a * quad - log_ratio / (2.0 * (a - 1.0))


def kl_divergence_gaussian(gi: GaussianLike, gj: GaussianLike) -> float:
    gi, gj = as_gaussian_n(gi), as_gaussian_n(gj)
    _check_same_dim(gi, gj)
    chol_j = np.linalg.cholesky(gj.covariance)
    inv_chol = np.linalg.solve(chol_j, np.eye(gi.dim))
    trace = float(np.sum((inv_chol @ np.linalg.cholesky(gi.covariance)) ** 2))
    z = inv_chol @ (gj.mean - gi.mean)
    logdet_j = 2.0 * float(np.sum(np.log(np.diag(chol_j))))
    return 0.5 * (trace + float(z @ z) - gi.dim + logdet_j - _logdet_pd(gi.covariance))


def geometric_mixture_gaussian(gi: GaussianLike, gj: GaussianLike, order: OrderLike) -> GaussianN:
    """Normalized N_i^(1-a) N_j^a, i.e. the Gaussian with precision
    (1-a) P_i + a P_j."""
    gi, gj = as_gaussian_n(gi), as_gaussian_n(gj)
    _check_same_dim(gi, gj)
    a = as_order(order).alpha
    prec_i = np.linalg.inv(gi.covariance)
    prec_j = np.linalg.inv(gj.covariance)
    prec = (1.0 - a) * prec_i + a * prec_j
    prec = 0.5 * (prec + prec.T)
    if not is_positive_definite(prec):
        raise InfeasibleOrderError(f"order {a} gives a non-normalizable mixture")
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ ((1.0 - a) * prec_i @ gi.mean + a * prec_j @ gj.mean)
    return GaussianN(mean, cov)
