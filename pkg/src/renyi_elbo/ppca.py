"""Probabilistic PCA and the spectral Renyi regularizer.

The model is x = C y + v with y ~ N(0, I_y) and v ~ N(0, sigma^2 I_x).
Everything here is expressed through the thin SVD of the scaled loading
Lambda = C / sigma = U diag(lam) V^T, so no N_x x N_x matrix is ever
inverted on the fast path. ``dense_oracle_regularizer`` does the
inversion explicitly and is only there as ground truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .divergence import GaussianN, OrderLike, RenyiOrder, as_order
from .errors import DegenerateModelError, DimensionError

MODEL_FORMAT_VERSION = 1
RANK_RTOL = 1e-10
DENSE_MAX_NX = 512


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return signs


@dataclass(frozen=True, eq=False)
class PpcaModel:
    """Loading matrix C (N_x x N_y) and isotropic noise scale sigma.

    ``allow_degenerate`` lifts the full-column-rank check; it exists for
    the uncoupled limit C = 0 and should not be used otherwise.
    """

    loading: np.ndarray
    noise_std: float
    allow_degenerate: bool = False

    def __post_init__(self):
        c = np.atleast_2d(np.array(self.loading, dtype=float))
        if c.ndim != 2:
            raise DimensionError("loading must be a matrix")
        sigma = float(self.noise_std)
        if not (math.isfinite(sigma) and sigma > 0):
            raise DegenerateModelError(f"noise_std must be positive, got {sigma!r}")
        if not np.all(np.isfinite(c)):
            raise DegenerateModelError("loading has non-finite entries")
        n_x, n_y = c.shape
        if n_y > n_x:
            raise DimensionError(f"latent dimension {n_y} exceeds data dimension {n_x}")
        if not self.allow_degenerate:
            s = np.linalg.svd(c, compute_uv=False)
            if not (s[0] > 0 and s[-1] > RANK_RTOL * s[0]):
                raise DegenerateModelError("loading does not have full column rank")
        c.setflags(write=False)
        object.__setattr__(self, "loading", c)
        object.__setattr__(self, "noise_std", sigma)

    @property
    def n_x(self) -> int:
        return self.loading.shape[0]

    @property
    def n_y(self) -> int:
        return self.loading.shape[1]

    @property
    def scaled_loading(self) -> np.ndarray:
        return self.loading / self.noise_std

    def check_data_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_x,):
            raise DimensionError(f"expected a vector of length {self.n_x}, got shape {x.shape}")
        return x

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "n_x": self.n_x,
            "n_y": self.n_y,
            "sigma": self.noise_std,
            "loading": self.loading.ravel(order="C").tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict, allow_degenerate: bool = False) -> "PpcaModel":
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {doc.get('version')!r}")
        n_x, n_y = int(doc["n_x"]), int(doc["n_y"])
        loading = np.asarray(doc["loading"], dtype=float)
        if loading.size != n_x * n_y:
            raise DimensionError(f"loading has {loading.size} entries, expected {n_x * n_y}")
        return cls(loading.reshape(n_x, n_y), float(doc["sigma"]), allow_degenerate)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str, allow_degenerate: bool = False) -> "PpcaModel":
        return cls.from_dict(json.loads(text), allow_degenerate)


@dataclass(frozen=True, eq=False)
class LatentSpectrum:
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    @property
    def lam_sq(self) -> np.ndarray:
        return self.singular_values**2

    @property
    def g_minus(self) -> np.ndarray:
        """Diagonal of L (I + L^2)^-1 L."""
        return self.lam_sq / (1.0 + self.lam_sq)

    def g_alpha(self, order: OrderLike) -> np.ndarray:
        """Diagonal of the middle factor, lam^2 / (1 - a lam^2 / (1 + lam^2))."""
        a = as_order(order).alpha
        return self.lam_sq / (1.0 - a * self.g_minus)


def spectrum(model: PpcaModel) -> LatentSpectrum:
    """Thin SVD of C / sigma with a deterministic sign convention."""
    u, s, vt = np.linalg.svd(model.scaled_loading, full_matrices=False)
    signs = _canonical_signs(u)
    return LatentSpectrum(u * signs, s, vt.T * signs)


def posterior(model: PpcaModel, x, spec: LatentSpectrum | None = None) -> GaussianN:
    """W(y|x), computed entirely in the latent space."""
    x = model.check_data_vector(x)
    spec = spectrum(model) if spec is None else spec
    v, lam = spec.right_vectors, spec.singular_values
    proj = spec.left_vectors.T @ (x / model.noise_std)
    mean = v @ (lam / (1.0 + lam**2) * proj)
    cov = (v / (1.0 + lam**2)) @ v.T
    return GaussianN(mean, 0.5 * (cov + cov.T))


def _unit_order(order: OrderLike) -> RenyiOrder:
    order = as_order(order)
    order.require_unit_interval()
    return order


def h_alpha_diag(spec: LatentSpectrum, order: OrderLike) -> np.ndarray:
    a = _unit_order(order).alpha
    one_plus = 1.0 + spec.lam_sq
    return spec.lam_sq / (one_plus * (one_plus - a * spec.lam_sq))


def scalar_term(spec: LatentSpectrum, order: OrderLike, x, noise_std: float) -> float:
    """Bare quadratic form xbar^T U H U^T xbar with xbar = x / sigma."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.left_vectors.shape[0],):
        raise DimensionError(
            f"expected a vector of length {spec.left_vectors.shape[0]}, got shape {x.shape}"
        )
    proj = spec.left_vectors.T @ (x / noise_std)
    return float(np.sum(h_alpha_diag(spec, order) * proj**2))


def logdet_term_corrected(spec: LatentSpectrum, order: OrderLike) -> float:
    """log(|S*| / (|S_i|^(1-a) |S_j|^a)) for S_i = I, S_j = (I + Lambda^T Lambda)^-1.

    Both covariances diagonalize in V, so the determinant ratio factorizes
    per eigenvalue.
    """
    a = _unit_order(order).alpha
    lam_sq = spec.lam_sq
    return float(np.sum(np.log1p(-a * lam_sq / (1.0 + lam_sq)) + a * np.log1p(lam_sq)))


class ShortcutLogdet(NamedTuple):
    """Values of the determinant-shortcut chain.

    ``logdet`` is log[((1-a) + a P) / (a P)] with P = prod (1 + lam^2)^-1,
    which treats det of a weighted sum as the weighted sum of dets.
    ``regularizer`` is the same expression after a -> 1 - a, i.e.
    log[a/(1-a) prod(1 + lam^2) + 1]. Kept for discrepancy reporting only.
    """

    logdet: float
    regularizer: float


def logdet_term_paper(spec: LatentSpectrum, order: OrderLike) -> ShortcutLogdet:
    a = _unit_order(order).alpha
    log_prod = float(np.sum(np.log1p(spec.lam_sq)))  # log prod(1 + lam^2)
    p = math.exp(-log_prod)
    logdet = math.log((1.0 - a) + a * p) - math.log(a) + log_prod
    reg = float(np.logaddexp(math.log(a / (1.0 - a)) + log_prod, 0.0))
    return ShortcutLogdet(logdet, reg)


@dataclass(frozen=True)
class RegularizerBreakdown:
    """D_{1-a}[q || W] for q = N(0, I), split into its two summands.

    ``scalar_term``, ``logdet_term_corrected`` and ``logdet_term_paper``
    are evaluated at ``order_used`` = 1 - a. ``total_paper`` is the
    shortcut chain's closed form at the caller's order a.
    """

    scalar_term: float
    logdet_term_corrected: float
    logdet_term_paper: float
    total_corrected: float
    total_paper: float
    order_used: RenyiOrder


def renyi_regularizer(
    model: PpcaModel, x, order: OrderLike, spec: LatentSpectrum | None = None
) -> RegularizerBreakdown:
    """The third RELBO term, ((1-a)/a) D_a[W || q] = D_{1-a}[q || W]."""
    order = _unit_order(order)
    x = model.check_data_vector(x)
    spec = spectrum(model) if spec is None else spec
    skew = order.complement()
    b = skew.alpha
    quad = scalar_term(spec, skew, x, model.noise_std)
    logdet = logdet_term_corrected(spec, skew)
    total = 0.5 * b * quad - logdet / (2.0 * (b - 1.0))
    return RegularizerBreakdown(
        scalar_term=quad,
        logdet_term_corrected=logdet,
        logdet_term_paper=logdet_term_paper(spec, skew).logdet,
        total_corrected=total,
        total_paper=logdet_term_paper(spec, order).regularizer,
        order_used=skew,
    )


def dense_oracle_regularizer(model: PpcaModel, x, order: OrderLike) -> float:
    """D_{1-a}[N(0, I) || W(y|x)] from explicitly built matrices."""
    order = _unit_order(order)
    x = model.check_data_vector(x)
    if model.n_x > DENSE_MAX_NX:
        raise DimensionError(f"dense oracle limited to N_x <= {DENSE_MAX_NX}")
    c, sigma = model.loading, model.noise_std
    marginal = c @ c.T + sigma**2 * np.eye(model.n_x)
    beta = c.T @ np.linalg.inv(marginal)
    cov_j = np.eye(model.n_y) - beta @ c
    cov_j = 0.5 * (cov_j + cov_j.T)
    mean_j = beta @ x
    b = 1.0 - order.alpha
    s_star = (1.0 - b) * np.eye(model.n_y) + b * cov_j
    quad = float(mean_j @ np.linalg.solve(s_star, mean_j))
    _, logdet_star = np.linalg.slogdet(s_star)
    _, logdet_j = np.linalg.slogdet(cov_j)
    return 0.5 * b * quad - (logdet_star - b * logdet_j) / (2.0 * (b - 1.0))


def log_evidence(model: PpcaModel, x, spec: LatentSpectrum | None = None) -> float:
    """log N(x; 0, C C^T + sigma^2 I) via the determinant lemma and Woodbury."""
    x = model.check_data_vector(x)
    spec = spectrum(model) if spec is None else spec
    xbar = x / model.noise_std
    proj = spec.left_vectors.T @ xbar
    quad = float(xbar @ xbar - np.sum(spec.g_minus * proj**2))
    logdet = 2.0 * model.n_x * math.log(model.noise_std) + float(np.sum(np.log1p(spec.lam_sq)))
    return -0.5 * (model.n_x * math.log(2.0 * math.pi) + logdet + quad)


def sample_data(model: PpcaModel, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((count, model.n_y))
    v = model.noise_std * rng.standard_normal((count, model.n_x))
    return y @ model.loading.T + v


def fit_from_data(data, latent_dim: int, allow_degenerate: bool = False) -> PpcaModel:
    """Closed-form maximum-likelihood P-PCA from the sample covariance.

    sigma^2 is the mean of the discarded eigenvalues; loading columns are
    the leading eigenvectors scaled by sqrt(max(eig - sigma^2, 0)).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DimensionError("data must be a matrix with one sample per row")
    n, n_x = data.shape
    if not 0 < latent_dim < n_x:
        raise DimensionError(f"latent_dim must lie in [1, {n_x - 1}], got {latent_dim}")
    if n < 2:
        raise DegenerateModelError("need at least two samples")
    cov = np.cov(data, rowvar=False).reshape(n_x, n_x)
    eig, vecs = np.linalg.eigh(cov)
    eig, vecs = eig[::-1], vecs[:, ::-1]
    sigma_sq = float(eig[latent_dim:].mean())
    if not sigma_sq > 0:
        raise DegenerateModelError("sample covariance is singular in the discarded subspace")
    top = vecs[:, :latent_dim]
    top = top * _canonical_signs(top)
    scales = np.sqrt(np.clip(eig[:latent_dim] - sigma_sq, 0.0, None))
    return PpcaModel(top * scales, math.sqrt(sigma_sq), allow_degenerate)


def random_model(
    rng: np.random.Generator, n_x: int, n_y: int, scale: float = 1.0, noise_std: float = 1.0
) -> PpcaModel:
    """Gaussian loading with entries N(0, scale^2 / n_x)."""
    loading = rng.standard_normal((n_x, n_y)) * scale / math.sqrt(n_x)
    return PpcaModel(loading, noise_std)
