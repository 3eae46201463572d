"""SELBO, beta-ELBO and RELBO on the P-PCA testbed.

The prior is q = N(0, I_y), which is also the true latent marginal, so the
decoder W(y|x) p(x) / q(y) is exactly the likelihood N(C y, sigma^2 I) and
every bound term is analytic.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.linalg import expm

from .divergence import (
    GaussianN,
    OrderLike,
    RenyiOrder,
    as_order,
    geometric_mixture_gaussian,
    is_positive_definite,
    kl_divergence_gaussian,
)
from .errors import DimensionError, InvalidDistributionError
from .ppca import LatentSpectrum, PpcaModel, log_evidence, posterior, renyi_regularizer, spectrum


@dataclass(frozen=True, eq=False)
class GaussianEncoder:
    """V(y|x) = N(A x + b, S) with a data-independent covariance S."""

    mean_map: np.ndarray
    offset: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.mean_map, dtype=float))
        b = np.atleast_1d(np.array(self.offset, dtype=float))
        s = np.atleast_2d(np.array(self.covariance, dtype=float))
        n_y = b.size
        if a.shape[0] != n_y or s.shape != (n_y, n_y):
            raise DimensionError("encoder mean map, offset and covariance disagree in size")
        s = 0.5 * (s + s.T)
        if not is_positive_definite(s):
            raise InvalidDistributionError("encoder covariance is not positive definite")
        object.__setattr__(self, "mean_map", a)
        object.__setattr__(self, "offset", b)
        object.__setattr__(self, "covariance", s)

    @classmethod
    def constant(cls, dist: GaussianN, n_x: int) -> "GaussianEncoder":
        """An encoder that returns ``dist`` for every x."""
        return cls(np.zeros((dist.dim, n_x)), dist.mean, dist.covariance)

    def at(self, x) -> GaussianN:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.mean_map.shape[1],):
            raise DimensionError(f"encoder expects x of length {self.mean_map.shape[1]}")
        return GaussianN(self.mean_map @ x + self.offset, self.covariance)

    def perturbed(self, scale: float, rng: np.random.Generator) -> "GaussianEncoder":
        """Random nearby encoder; the covariance stays positive definite via a
        matrix-exponential congruence."""
        n_y = self.offset.size
        shift = scale * rng.standard_normal(n_y)
        twist = expm(scale * rng.standard_normal((n_y, n_y)) / math.sqrt(n_y))
        cov = twist @ self.covariance @ twist.T
        return GaussianEncoder(self.mean_map, self.offset + shift, cov)


def _prior(model: PpcaModel) -> GaussianN:
    return GaussianN.standard(model.n_y)


def _unit_order(order: OrderLike) -> RenyiOrder:
    order = as_order(order)
    order.require_unit_interval()
    return order


def optimal_encoder(
    model: PpcaModel, x, order: OrderLike, spec: LatentSpectrum | None = None
) -> GaussianN:
    """V* = c_a q^(1-a) W^a, a Gaussian with precision (1-a) I + a Sigma_W^-1."""
    order = _unit_order(order)
    w = posterior(model, x, spec)
    return geometric_mixture_gaussian(_prior(model), w, order)


def _log_power_integral(g1: GaussianN, g2: GaussianN, w1: float) -> float:
    """log of the integral of N1^w1 N2^(1-w1), by completing the square."""
    w2 = 1.0 - w1
    p1 = np.linalg.inv(g1.covariance)
    p2 = np.linalg.inv(g2.covariance)
    prec = w1 * p1 + w2 * p2
    lin = w1 * p1 @ g1.mean + w2 * p2 @ g2.mean
    _, logdet_prec = np.linalg.slogdet(prec)
    _, logdet1 = np.linalg.slogdet(g1.covariance)
    _, logdet2 = np.linalg.slogdet(g2.covariance)
    # the (2 pi)^(n/2) factors cancel because the weights sum to one
    return (
        0.5 * float(lin @ np.linalg.solve(prec, lin))
        - 0.5 * (w1 * float(g1.mean @ p1 @ g1.mean) + w2 * float(g2.mean @ p2 @ g2.mean))
        - 0.5 * logdet_prec
        - 0.5 * (w1 * logdet1 + w2 * logdet2)
    )


def c_alpha(model: PpcaModel, x, order: OrderLike, spec: LatentSpectrum | None = None) -> float:
    """c_a(x) = [ integral q^(1-a)(y) W^a(y|x) dy ]^-1."""
    a = _unit_order(order).alpha
    w = posterior(model, x, spec)
    return math.exp(-_log_power_integral(w, _prior(model), a))


def reconstruction_term(encoder: GaussianEncoder, model: PpcaModel, x) -> float:
    """E_{y ~ V(y|x)} log N(x; C y, sigma^2 I)."""
    x = model.check_data_vector(x)
    if encoder.offset.size != model.n_y:
        raise DimensionError("encoder latent size does not match the model")
    v = encoder.at(x)
    c, var = model.loading, model.noise_std**2
    resid = x - c @ v.mean
    spread = float(np.sum((c.T @ c) * v.covariance))  # tr(C^T C S)
    return -0.5 * (model.n_x * math.log(2.0 * math.pi * var) + (resid @ resid + spread) / var)


@dataclass(frozen=True)
class BoundReport:
    """All bound terms at one (x, a, beta).

    ``renyi_regularizer`` is the weighted third term ((1-a)/a) D_a[W || q].
    ``gap`` is D[V || V*]; the exact identity reads
    log p(x) - gap / a = relbo, and ``identity_residual`` is its defect.
    ``unit_gap_residual`` is log p(x) - gap - relbo, which vanishes only
    at V = V*.
    """

    alpha: float
    beta: float
    reconstruction: float
    kl_regularizer: float
    renyi_regularizer: float
    relbo: float
    selbo: float
    beta_elbo: float
    log_evidence: float
    gap: float
    identity_residual: float
    unit_gap_residual: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def bound_report(
    encoder: GaussianEncoder,
    model: PpcaModel,
    x,
    order: OrderLike,
    beta: float,
    spec: LatentSpectrum | None = None,
) -> BoundReport:
    order = _unit_order(order)
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    x = model.check_data_vector(x)
    spec = spectrum(model) if spec is None else spec
    a = order.alpha
    v = encoder.at(x)
    recon = reconstruction_term(encoder, model, x)
    kl_q = kl_divergence_gaussian(v, _prior(model))
    reg = renyi_regularizer(model, x, order, spec).total_corrected
    relbo = recon - kl_q / a + reg
    evidence = log_evidence(model, x, spec)
    gap = kl_divergence_gaussian(v, optimal_encoder(model, x, order, spec))
    return BoundReport(
        alpha=a,
        beta=float(beta),
        reconstruction=recon,
        kl_regularizer=kl_q,
        renyi_regularizer=reg,
        relbo=relbo,
        selbo=recon - kl_q,
        beta_elbo=recon - beta * kl_q,
        log_evidence=evidence,
        gap=gap,
        identity_residual=evidence - gap / a - relbo,
        unit_gap_residual=evidence - gap - relbo,
    )


def beta_failure_term(encoder: GaussianEncoder, model: PpcaModel, x) -> float:
    """D[V || p(y)] - D[V || p(y|x)], the piece a beta-ELBO silently drops."""
    x = model.check_data_vector(x)
    v = encoder.at(x)
    return kl_divergence_gaussian(v, _prior(model)) - kl_divergence_gaussian(v, posterior(model, x))
