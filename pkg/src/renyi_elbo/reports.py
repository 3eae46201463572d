"""Tables behind the ppca, relbo and discrepancy commands.

Each builder returns (columns, rows[, extras]) so the CLI only handles
files and exit codes. Randomness comes from ``task_rng`` so every table is
a pure function of the master seed.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from .bounds import BoundReport, GaussianEncoder, bound_report, optimal_encoder
from .ppca import (
    PpcaModel,
    dense_oracle_regularizer,
    fit_from_data,
    posterior,
    random_model,
    renyi_regularizer,
    sample_data,
    spectrum,
)

DEFAULT_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 10))


def task_rng(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent stream for one named task under the master seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode()), *keys]))


def task_seed(seed: int, name: str, *keys: int) -> int:
    return int(task_rng(seed, name, *keys).integers(2**31 - 1))


def model_with_spectrum(rng: np.random.Generator, n_x: int, lams, noise_std: float = 1.0) -> PpcaModel:
    """Loading sigma U diag(lams) V^T with Haar-random orthonormal U and V."""
    lams = np.asarray(lams, dtype=float)
    n_y = lams.size
    u = ortho_group.rvs(n_x, random_state=rng)[:, :n_y] if n_x > 1 else np.ones((1, 1))
    v = ortho_group.rvs(n_y, random_state=rng) if n_y > 1 else np.ones((1, 1))
    degenerate = not np.all(lams > 0)
    return PpcaModel(noise_std * u @ np.diag(lams) @ v.T, noise_std, allow_degenerate=degenerate)


# -- ppca ---------------------------------------------------------------------

PPCA_COLUMNS = (
    "alpha", "x_index", "scalar", "logdet_corrected", "logdet_paper",
    "total_corrected", "total_paper", "dense_oracle", "abs_diff",
)


@dataclass
class PpcaSetup:
    n_x: int = 64
    n_y: int = 8
    noise_std: float = 1.0
    scale: float = 2.0
    samples: int = 2000
    x_count: int = 5
    degenerate: bool = False
    model: str | None = None
    data: str | None = None


def ppca_pipeline(setup: PpcaSetup, seed: int, load_model=None, load_data=None):
    """Model to evaluate and the x vectors to evaluate it at.

    Order of precedence: a model file; a data file to fit; the zero-loading
    test model; otherwise generate from a random model and refit.
    """
    if setup.model is not None:
        model = load_model(setup.model, setup.degenerate)
        xs = sample_data(model, setup.x_count, task_seed(seed, "ppca-x"))
        return model, xs
    if setup.data is not None:
        data = load_data(setup.data)
        model = fit_from_data(data, setup.n_y)
        return model, data[: setup.x_count]
    if setup.degenerate:
        model = PpcaModel(np.zeros((setup.n_x, setup.n_y)), setup.noise_std, allow_degenerate=True)
        xs = sample_data(model, setup.x_count, task_seed(seed, "ppca-x"))
        return model, xs
    truth = random_model(task_rng(seed, "ppca-truth"), setup.n_x, setup.n_y, setup.scale, setup.noise_std)
    data = sample_data(truth, setup.samples, task_seed(seed, "ppca-data"))
    model = fit_from_data(data, setup.n_y)
    return model, data[: setup.x_count]


def ppca_row(model: PpcaModel, spec, x, x_index: int, alpha: float) -> tuple:
    br = renyi_regularizer(model, x, alpha, spec)
    dense = dense_oracle_regularizer(model, x, alpha)
    return (
        alpha, x_index, br.scalar_term, br.logdet_term_corrected, br.logdet_term_paper,
        br.total_corrected, br.total_paper, dense, abs(br.total_corrected - dense),
    )


def ppca_table(model: PpcaModel, xs, alphas, mapper=map) -> list[tuple]:
    spec = spectrum(model)
    cells = [(a, i) for a in alphas for i in range(len(xs))]
    return list(mapper(lambda c: ppca_row(model, spec, xs[c[1]], c[1], c[0]), cells))


# -- relbo --------------------------------------------------------------------

RELBO_PREFIX = ("encoder", "perturbation_scale", "draw", "x_index")
RELBO_COLUMNS = RELBO_PREFIX + tuple(BoundReport.columns()) + ("beta_elbo_exceeds_evidence",)


@dataclass
class RelboSetup:
    n_x: int = 16
    n_y: int = 3
    noise_std: float = 1.0
    scale: float = 2.0
    x_count: int = 3
    betas: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    perturbation_scales: tuple = (0.0, 0.1, 0.5)
    perturbations: int = 3


def relbo_inputs(setup: RelboSetup, seed: int):
    model = random_model(task_rng(seed, "relbo-model"), setup.n_x, setup.n_y, setup.scale, setup.noise_std)
    xs = sample_data(model, setup.x_count, task_seed(seed, "relbo-x"))
    return model, xs


def _encoders(model, x, alpha, setup: RelboSetup, seed: int, x_index: int):
    """(kind, scale, draw, encoder) for V*, its perturbations and the posterior."""
    vstar = GaussianEncoder.constant(optimal_encoder(model, x, alpha), model.n_x)
    out = []
    for k, scale in enumerate(setup.perturbation_scales):
        if scale == 0:
            out.append(("optimal", 0.0, 0, vstar))
            continue
        rng = task_rng(seed, "relbo-perturb", x_index, k, int(round(alpha * 1e6)))
        for d in range(setup.perturbations):
            out.append(("optimal", float(scale), d, vstar.perturbed(scale, rng)))
    out.append(("posterior", 0.0, 0, GaussianEncoder.constant(posterior(model, x), model.n_x)))
    return out


def relbo_table(model: PpcaModel, xs, alphas, setup: RelboSetup, seed: int, mapper=map) -> list[tuple]:
    spec = spectrum(model)

    def run(cell):
        alpha, i = cell
        rows = []
        for kind, scale, draw, enc in _encoders(model, xs[i], alpha, setup, seed, i):
            for beta in setup.betas:
                rep = bound_report(enc, model, xs[i], alpha, beta, spec)
                exceeds = rep.beta != 1.0 and rep.beta_elbo > rep.log_evidence
                rows.append((kind, scale, draw, i, *rep.to_dict().values(), exceeds))
        return rows

    cells = [(a, i) for a in alphas for i in range(len(xs))]
    return [row for rows in mapper(run, cells) for row in rows]


# -- discrepancy ----------------------------------------------------------------

DISCREPANCY_COLUMNS = (
    "n_y", "spectrum_index", "alpha", "max_lambda", "paper", "corrected", "oracle",
    "paper_minus_oracle", "corrected_minus_oracle", "sum_step_residual", "denominator_step_residual",
)


@dataclass
class DiscrepancySetup:
    n_x: int = 16
    n_y_values: tuple = (1, 2, 3, 4, 6, 8)
    spectra_per_n_y: int = 5
    lambda_range: tuple = (0.1, 3.0)
    include_zero_spectrum: bool = True
    step_tolerance: float = 1e-10


def determinant_steps(cov_j: np.ndarray, alpha: float) -> tuple[float, float]:
    """Defects of the two determinant shortcuts with Sigma_i = I.

    sum step: log|(1-a) I + a S| versus log((1-a) + a|S|).
    denominator step: log(|I|^(1-a) |S|^a) versus log((1-a) a |S|).
    """
    n = cov_j.shape[0]
    _, logdet_s = np.linalg.slogdet(cov_j)
    _, logdet_sum = np.linalg.slogdet((1.0 - alpha) * np.eye(n) + alpha * cov_j)
    det_s = math.exp(logdet_s)
    sum_step = logdet_sum - math.log((1.0 - alpha) + alpha * det_s)
    denom_step = alpha * logdet_s - math.log((1.0 - alpha) * alpha * det_s)
    return float(sum_step), float(denom_step)


def _spectra(setup: DiscrepancySetup, seed: int):
    lo, hi = setup.lambda_range
    for n_y in setup.n_y_values:
        rng = task_rng(seed, "discrepancy", n_y)
        k0 = 0
        if setup.include_zero_spectrum:
            yield n_y, 0, np.zeros(n_y), rng
            k0 = 1
        for k in range(setup.spectra_per_n_y):
            lams = np.sort(rng.uniform(lo, hi, n_y))[::-1]
            yield n_y, k0 + k, lams, rng


def discrepancy_table(setup: DiscrepancySetup, alphas, seed: int) -> list[tuple]:
    """Shortcut chain vs corrected form vs dense oracle, at x = 0.

    At x = 0 the regularizer reduces to its log-det piece, the quantity the
    shortcut chain claims to compute.
    """
    rows = []
    for n_y, k, lams, rng in _spectra(setup, seed):
        model = model_with_spectrum(rng, max(setup.n_x, n_y), lams)
        spec = spectrum(model)
        x0 = np.zeros(model.n_x)
        cov_j = posterior(model, x0, spec).covariance
        for a in alphas:
            br = renyi_regularizer(model, x0, a, spec)
            oracle = dense_oracle_regularizer(model, x0, a)
            sum_step, denom_step = determinant_steps(cov_j, a)
            rows.append((
                n_y, k, a, float(lams.max()), br.total_paper, br.total_corrected, oracle,
                br.total_paper - oracle, br.total_corrected - oracle, sum_step, denom_step,
            ))
    return rows


def discrepancy_summary(rows, step_tolerance: float = 1e-10) -> dict:
    cols = {name: i for i, name in enumerate(DISCREPANCY_COLUMNS)}

    def first_failure(col):
        bad = sorted({r[cols["n_y"]] for r in rows if abs(r[cols[col]]) > step_tolerance})
        return bad[0] if bad else None

    strong = [r for r in rows if r[cols["max_lambda"]] >= 0.5]
    return {
        "rows": len(rows),
        "first_n_y_sum_step_fails": first_failure("sum_step_residual"),
        "first_n_y_denominator_step_fails": first_failure("denominator_step_residual"),
        "max_abs_corrected_minus_oracle": max(abs(r[cols["corrected_minus_oracle"]]) for r in rows),
        "min_abs_paper_minus_oracle_strong_spectra": (
            min(abs(r[cols["paper_minus_oracle"]]) for r in strong) if strong else None
        ),
        "strong_spectrum_rows": len(strong),
    }


def discrepancy_text(summary: dict) -> str:
    lines = [
        "Determinant shortcut versus exact log-det (x = 0, Sigma_i = I)",
        f"  rows tabulated: {summary['rows']}",
        "  det of weighted sum replaced by weighted sum of dets: first fails at "
        f"N_y = {summary['first_n_y_sum_step_fails']}",
        "  weighted geometric mean of dets replaced by a product: first fails at "
        f"N_y = {summary['first_n_y_denominator_step_fails']}",
        f"  max |corrected - oracle|: {summary['max_abs_corrected_minus_oracle']:.3e}",
    ]
    if summary["min_abs_paper_minus_oracle_strong_spectra"] is not None:
        lines.append(
            "  min |shortcut - oracle| over spectra with max lambda >= 0.5: "
            f"{summary['min_abs_paper_minus_oracle_strong_spectra']:.3e} "
            f"({summary['strong_spectrum_rows']} rows)"
        )
    return "\n".join(lines) + "\n"
