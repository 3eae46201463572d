"""Named oracle reconciliations run by ``renyi-elbo verify``.

Each check returns the worst error it saw; the runner compares it with a
tolerance that can be overridden per check or globally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dichotomic as dc
from .bounds import GaussianEncoder, bound_report, optimal_encoder
from .divergence import (
    DiscreteDist,
    Gaussian1,
    GaussianN,
    identity_b1_residual,
    kl_divergence_discrete,
    kl_divergence_gaussian,
    renyi_divergence_discrete,
    renyi_divergence_gaussian,
)
from .gm_landscape import BivariateParams, GmGrid, PriorParams, ibar_closed, ibar_rho1, sweep
from .oracle import oracle_renyi_divergence
from .ppca import (
    dense_oracle_regularizer,
    log_evidence,
    posterior,
    random_model,
    renyi_regularizer,
    sample_data,
    spectrum,
)
from .reports import DEFAULT_ALPHAS, task_rng, task_seed


@dataclass(frozen=True)
class CheckResult:
    check: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)

    def to_dict(self) -> dict:
        return {"check": self.check, "max_error": self.max_error, "tolerance": self.tolerance, "pass": self.passed}


def random_gaussian1(rng) -> Gaussian1:
    return Gaussian1(rng.uniform(-5, 5), rng.uniform(0.1, 10))


def random_gaussian_n(rng, dim: int) -> GaussianN:
    a = rng.standard_normal((dim, dim))
    return GaussianN(rng.standard_normal(dim), a @ a.T / dim + 0.5 * np.eye(dim))


def random_discrete(rng, size: int) -> DiscreteDist:
    return DiscreteDist.normalized(rng.dirichlet(np.ones(size)))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


# -- divergence core ------------------------------------------------------------


def check_gaussian_quadrature(seed, pairs=100):
    rng = task_rng(seed, "verify-quad")
    worst = 0.0
    for _ in range(pairs):
        gi, gj = random_gaussian1(rng), random_gaussian1(rng)
        for a in DEFAULT_ALPHAS:
            worst = max(worst, abs(renyi_divergence_gaussian(gi, gj, a) - oracle_renyi_divergence(gi, gj, a).value))
    return worst


def check_gaussian_montecarlo(seed, pairs=4, samples=200_000):
    """Largest |closed - MC| in units of the reported standard error."""
    rng = task_rng(seed, "verify-mc")
    worst = 0.0
    for k in range(pairs):
        gi, gj = random_gaussian_n(rng, 3), random_gaussian_n(rng, 3)
        mc = oracle_renyi_divergence(gi, gj, 0.5, mode="montecarlo", budget=samples, seed=task_seed(seed, "mc", k))
        worst = max(worst, abs(renyi_divergence_gaussian(gi, gj, 0.5) - mc.value) / mc.error)
    return worst


def check_skew_discrete(seed, trials=200):
    rng = task_rng(seed, "verify-skew-d")
    worst = 0.0
    for _ in range(trials):
        p, q = random_discrete(rng, 5), random_discrete(rng, 5)
        a = rng.uniform(0.05, 0.95)
        lhs = (1 - a) / a * renyi_divergence_discrete(p, q, a)
        worst = max(worst, _rel(lhs, renyi_divergence_discrete(q, p, 1 - a)))
    return worst


def check_skew_gaussian(seed, trials=200):
    rng = task_rng(seed, "verify-skew-g")
    worst = 0.0
    for _ in range(trials):
        gi, gj = random_gaussian_n(rng, 3), random_gaussian_n(rng, 3)
        a = rng.uniform(0.05, 0.95)
        lhs = (1 - a) / a * renyi_divergence_gaussian(gi, gj, a)
        worst = max(worst, _rel(lhs, renyi_divergence_gaussian(gj, gi, 1 - a)))
    return worst


def check_kl_limit_discrete(seed, trials=200):
    rng = task_rng(seed, "verify-kl-d")
    worst = 0.0
    for _ in range(trials):
        p, q = random_discrete(rng, 4), random_discrete(rng, 4)
        kl = kl_divergence_discrete(p, q)
        for a in (1 - 1e-4, 1 + 1e-4):
            worst = max(worst, abs(renyi_divergence_discrete(p, q, a) - kl) / max(kl, 1e-300))
    return worst


def check_kl_limit_gaussian(seed, trials=100):
    """|KL - D_a| / (|1 - a| max(1, KL)) at a = 0.999.

    The gap is first order in 1 - a with a slope that grows with the
    separation of the pair, hence the scale factor.
    """
    rng = task_rng(seed, "verify-kl-g")
    a = 0.999
    worst = 0.0
    for _ in range(trials):
        gi, gj = random_gaussian_n(rng, 3), random_gaussian_n(rng, 3)
        kl = kl_divergence_gaussian(gi, gj)
        gap = abs(kl - renyi_divergence_gaussian(gi, gj, a))
        worst = max(worst, gap / (abs(1 - a) * max(1.0, kl)))
    return worst


def check_b1_identity(seed, trials=1000):
    rng = task_rng(seed, "verify-b1")
    worst = 0.0
    for _ in range(trials):
        r, p, q = (random_discrete(rng, 4) for _ in range(3))
        worst = max(worst, abs(identity_b1_residual(r, p, q, rng.uniform(0.05, 0.95))))
    return worst


# -- P-PCA and bounds -------------------------------------------------------------


def _ppca_cases(seed, models, x_per_model=2):
    rng = task_rng(seed, "verify-ppca")
    for k in range(models):
        n_y = int(rng.integers(1, 9))
        n_x = int(rng.integers(n_y, 65))
        model = random_model(rng, n_x, n_y, scale=rng.uniform(0.5, 4.0), noise_std=rng.uniform(0.5, 2.0))
        yield model, sample_data(model, x_per_model, task_seed(seed, "verify-ppca-x", k))


def check_ppca_fast_vs_dense(seed, models=30):
    worst = 0.0
    for model, xs in _ppca_cases(seed, models):
        spec = spectrum(model)
        for x in xs:
            for a in DEFAULT_ALPHAS:
                fast = renyi_regularizer(model, x, a, spec).total_corrected
                worst = max(worst, _rel(fast, dense_oracle_regularizer(model, x, a)))
    return worst


def check_ppca_skew(seed, models=30):
    worst = 0.0
    for model, xs in _ppca_cases(seed, models):
        spec = spectrum(model)
        prior = GaussianN.standard(model.n_y)
        for x in xs:
            w = posterior(model, x, spec)
            for a in DEFAULT_ALPHAS:
                fast = renyi_regularizer(model, x, a, spec).total_corrected
                worst = max(worst, _rel(fast, (1 - a) / a * renyi_divergence_gaussian(w, prior, a)))
    return worst


def check_log_evidence(seed, models=30):
    worst = 0.0
    for model, xs in _ppca_cases(seed, models):
        c, s = model.loading, model.noise_std
        dense = GaussianN(np.zeros(model.n_x), c @ c.T + s**2 * np.eye(model.n_x))
        for x in xs:
            worst = max(worst, _rel(log_evidence(model, x), float(dense.logpdf(x)[0])))
    return worst


def _relbo_reports(seed, models=10, perturbations=5):
    rng = task_rng(seed, "verify-relbo")
    for model, xs in _ppca_cases(seed, models, x_per_model=1):
        x = xs[0]
        spec = spectrum(model)
        for a in (0.2, 0.5, 0.8):
            vstar = GaussianEncoder.constant(optimal_encoder(model, x, a, spec), model.n_x)
            encoders = [vstar] + [vstar.perturbed(0.3, rng) for _ in range(perturbations)]
            for enc in encoders:
                yield bound_report(enc, model, x, a, 1.0, spec)


def check_relbo_identity(seed):
    return max(abs(r.identity_residual) for r in _relbo_reports(seed))


def check_relbo_bound(seed):
    return max(max(0.0, r.relbo - r.log_evidence) for r in _relbo_reports(seed))


# -- discrete counterexample --------------------------------------------------------


def _joint_cases(seed, trials=100):
    rng = task_rng(seed, "verify-dichotomic")
    for _ in range(trials):
        yield dc.random_joint(rng), random_discrete(rng, 2), rng.uniform(0.05, 0.95)


def check_dichotomic_routes(seed):
    return max(
        abs(dc.f_alpha(j, q, a) - dc.f_alpha_tilted(j, q, a)) for j, q, a in _joint_cases(seed)
    )


def check_shannon_decomposition(seed):
    return max(abs(dc.shannon_decomposition_residual(j, q)) for j, q, _ in _joint_cases(seed))


def check_variational_optimum(seed):
    return max(dc.variational_rep_residual(j, q, a, 1000).optimum_residual for j, q, a in _joint_cases(seed, 30))


def check_variational_grid(seed):
    return max(dc.variational_rep_residual(j, q, 0.5).grid_residual for j, q, _ in _joint_cases(seed, 30))


# -- Gaussian landscape ------------------------------------------------------------

VERIFY_GM_GRID = GmGrid(
    var_ratios=tuple(np.geomspace(0.25, 4.0, 4).tolist()),
    mean_gaps=(0.0, 1.0, 2.0, 3.0),
)


def check_gm_quadrature(seed, grid=VERIFY_GM_GRID, mapper=None):
    points = sweep(grid, with_oracle=True, mapper=mapper)
    return max((p.abs_diff for p in points if p.feasible), default=0.0)


def check_gm_rho1(seed):
    worst = 0.0
    rng = task_rng(seed, "verify-rho1")
    for _ in range(20):
        params = BivariateParams(rho=math.sqrt(1 - 1e-8))
        prior = PriorParams(rng.uniform(-2, 2), rng.uniform(0.5, 2.0))
        for a in (0.25, 0.5, 0.75):
            worst = max(worst, abs(ibar_closed(a, params, prior) - ibar_rho1(params, prior)))
    return worst


CHECKS: dict[str, tuple[Callable, float]] = {
    "gaussian_closed_vs_quadrature": (check_gaussian_quadrature, 1e-8),
    "gaussian_closed_vs_montecarlo_zscore": (check_gaussian_montecarlo, 4.0),
    "skew_symmetry_discrete": (check_skew_discrete, 1e-10),
    "skew_symmetry_gaussian": (check_skew_gaussian, 1e-10),
    "kl_limit_discrete": (check_kl_limit_discrete, 1e-3),
    "kl_limit_gaussian": (check_kl_limit_gaussian, 10.0),
    "b1_identity": (check_b1_identity, 1e-11),
    "ppca_fast_vs_dense": (check_ppca_fast_vs_dense, 1e-10),
    "ppca_skew_cross_check": (check_ppca_skew, 1e-10),
    "ppca_log_evidence_vs_dense": (check_log_evidence, 1e-10),
    "relbo_identity": (check_relbo_identity, 1e-9),
    "relbo_upper_bound": (check_relbo_bound, 1e-9),
    "dichotomic_two_routes": (check_dichotomic_routes, 1e-12),
    "shannon_decomposition": (check_shannon_decomposition, 1e-12),
    "variational_optimum": (check_variational_optimum, 1e-12),
    "variational_grid": (check_variational_grid, 1e-4),
    "gm_closed_vs_quadrature": (check_gm_quadrature, 1e-7),
    "gm_rho1_limit": (check_gm_rho1, 1e-4),
}


def run_checks(seed: int, tolerances: dict | None = None, global_tolerance: float | None = None,
               mapper=None) -> list[CheckResult]:
    """Per-check ``tolerances`` beat ``global_tolerance``, which beats the defaults.

    ``mapper`` (an order-preserving map) spreads the checks over workers.
    """
    tolerances = tolerances or {}
    unknown = sorted(set(tolerances) - set(CHECKS))
    if unknown:
        raise KeyError(f"unknown check name(s) in tolerances: {', '.join(unknown)}")

    def run(name):
        fn, default = CHECKS[name]
        tol = tolerances.get(name, default if global_tolerance is None else global_tolerance)
        return CheckResult(name, float(fn(seed)), float(tol))

    return list((mapper or map)(run, list(CHECKS)))
