import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from renyi_elbo.divergence import GaussianN, renyi_divergence_gaussian
from renyi_elbo.errors import DegenerateModelError, DimensionError, InvalidOrderError
from renyi_elbo.ppca import (
    PpcaModel,
    dense_oracle_regularizer,
    fit_from_data,
    h_alpha_diag,
    log_evidence,
    logdet_term_corrected,
    logdet_term_paper,
    posterior,
    random_model,
    renyi_regularizer,
    sample_data,
    scalar_term,
    spectrum,
)

ALPHAS = [0.1 * k for k in range(1, 10)]
# log(0.75) + 0.5 log 2, 30-digit mpmath
LOGDET_LAM1_HALF = 0.0588915178281917273
# -log(2 pi) - (log 50 + log 25) / 2, 30-digit mpmath
EVIDENCE_345_AT_ZERO = -5.40332648155751889


@pytest.fixture
def hand_model():
    """C = (3, 4)^T, sigma = 5: Lambda = (0.6, 0.8)^T with a single unit singular value."""
    return PpcaModel(np.array([[3.0], [4.0]]), 5.0)


def zero_model(n_x=4, n_y=2, sigma=1.0):
    return PpcaModel(np.zeros((n_x, n_y)), sigma, allow_degenerate=True)


seeds = st.integers(0, 2**32 - 1)


def model_from_seed(seed, max_nx=24, max_ny=5):
    rng = np.random.default_rng(seed)
    n_y = int(rng.integers(1, max_ny + 1))
    n_x = int(rng.integers(n_y, max_nx + 1))
    model = random_model(rng, n_x, n_y, rng.uniform(0.3, 4.0), rng.uniform(0.5, 2.0))
    return model, sample_data(model, 1, int(rng.integers(2**31)))[0]


class TestModel:
    def test_rejects_rank_deficient(self):
        with pytest.raises(DegenerateModelError):
            PpcaModel(np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]), 1.0)

    def test_rejects_wide(self):
        with pytest.raises(DimensionError):
            PpcaModel(np.ones((2, 3)), 1.0)

    def test_rejects_bad_sigma(self):
        with pytest.raises(DegenerateModelError):
            PpcaModel(np.ones((2, 1)), 0.0)

    def test_json_round_trip(self, hand_model):
        doc = json.loads(hand_model.to_json())
        assert doc == {"version": 1, "n_x": 2, "n_y": 1, "sigma": 5.0, "loading": [3.0, 4.0]}
        back = PpcaModel.from_json(hand_model.to_json())
        assert_allclose(back.loading, hand_model.loading)

    def test_json_version_checked(self, hand_model):
        doc = hand_model.to_dict() | {"version": 99}
        with pytest.raises(ValueError):
            PpcaModel.from_dict(doc)


class TestSpectrum:
    def test_hand_values(self, hand_model):
        spec = spectrum(hand_model)
        assert_allclose(spec.singular_values, [1.0], atol=1e-15)
        assert_allclose(spec.left_vectors[:, 0], [0.6, 0.8], atol=1e-15)

    def test_identity_loading(self):
        spec = spectrum(PpcaModel(2.0 * np.eye(3), 2.0))
        assert_allclose(spec.singular_values, np.ones(3), atol=1e-14)

    @given(seeds)
    def test_invariants(self, seed):
        model, _ = model_from_seed(seed)
        spec = spectrum(model)
        u, lam, v = spec.left_vectors, spec.singular_values, spec.right_vectors
        eye = np.eye(model.n_y)
        assert_allclose(u.T @ u, eye, atol=1e-10)
        assert_allclose(v.T @ v, eye, atol=1e-10)
        assert_allclose(v @ v.T, eye, atol=1e-10)
        assert np.all(np.diff(lam) <= 0) and np.all(lam >= 0)
        recon = u @ np.diag(lam) @ v.T
        assert np.linalg.norm(recon - model.scaled_loading) <= 1e-10 * np.linalg.norm(model.scaled_loading)


class TestPosterior:
    def test_hand_values(self, hand_model):
        w = posterior(hand_model, np.array([3.0, 4.0]))
        assert_allclose(w.covariance, [[0.5]], atol=1e-15)
        assert_allclose(w.mean, [0.5], atol=1e-15)

    def test_zero_loading(self):
        w = posterior(zero_model(), np.ones(4))
        assert_allclose(w.mean, 0.0, atol=1e-15)
        assert_allclose(w.covariance, np.eye(2), atol=1e-15)

    def test_dimension_error(self, hand_model):
        with pytest.raises(DimensionError):
            posterior(hand_model, np.ones(3))

    @given(seeds)
    def test_matches_dense_and_woodbury(self, seed):
        model, x = model_from_seed(seed)
        c, s = model.loading, model.noise_std
        lam = model.scaled_loading
        beta = c.T @ np.linalg.inv(c @ c.T + s**2 * np.eye(model.n_x))
        w = posterior(model, x)
        assert_allclose(w.mean, beta @ x, rtol=1e-9, atol=1e-10)
        assert_allclose(w.covariance, np.eye(model.n_y) - beta @ c, atol=1e-10)
        # I - L^T (I + L L^T)^-1 L = (I + L^T L)^-1
        lhs = np.eye(model.n_y) - lam.T @ np.linalg.solve(np.eye(model.n_x) + lam @ lam.T, lam)
        assert_allclose(lhs, np.linalg.inv(np.eye(model.n_y) + lam.T @ lam), atol=1e-10)
        eig = np.sort(np.linalg.eigvalsh(w.covariance))
        assert_allclose(eig, np.sort(1 / (1 + spectrum(model).lam_sq)), atol=1e-10)


class TestSpectralTerms:
    def test_h_values(self, hand_model):
        spec = spectrum(hand_model)
        assert_allclose(h_alpha_diag(spec, 0.5), [1 / 3], atol=1e-15)
        assert_allclose(h_alpha_diag(spectrum(zero_model()), 0.5), 0.0)
        lam_sq = spec.lam_sq
        assert_allclose(h_alpha_diag(spec, 1e-12), lam_sq / (1 + lam_sq) ** 2, atol=1e-11)

    def test_order_checked(self, hand_model):
        with pytest.raises(InvalidOrderError):
            h_alpha_diag(spectrum(hand_model), 1.5)

    def test_scalar_values(self, hand_model):
        spec = spectrum(hand_model)
        assert scalar_term(spec, 0.5, np.zeros(2), 5.0) == 0.0
        assert scalar_term(spec, 0.5, np.array([3.0, 4.0]), 5.0) == pytest.approx(1 / 3, abs=1e-15)

    @given(seeds, st.floats(0.05, 0.95))
    def test_scalar_matches_dense(self, seed, a):
        model, x = model_from_seed(seed)
        w = posterior(model, x)
        s_star = (1 - a) * np.eye(model.n_y) + a * w.covariance
        dense = float(w.mean @ np.linalg.solve(s_star, w.mean))
        fast = scalar_term(spectrum(model), a, x, model.noise_std)
        assert fast == pytest.approx(dense, rel=1e-10, abs=1e-12)

    def test_logdet_values(self, hand_model):
        assert logdet_term_corrected(spectrum(hand_model), 0.5) == pytest.approx(LOGDET_LAM1_HALF, abs=1e-15)
        assert logdet_term_corrected(spectrum(zero_model()), 0.5) == 0.0

    @given(seeds, st.floats(0.02, 0.98))
    def test_logdet_matches_dense_and_nonnegative(self, seed, a):
        model, _ = model_from_seed(seed)
        cov_j = np.linalg.inv(np.eye(model.n_y) + model.scaled_loading.T @ model.scaled_loading)
        _, ld_star = np.linalg.slogdet((1 - a) * np.eye(model.n_y) + a * cov_j)
        _, ld_j = np.linalg.slogdet(cov_j)
        fast = logdet_term_corrected(spectrum(model), a)
        assert fast == pytest.approx(ld_star - a * ld_j, abs=1e-10)
        assert fast >= -1e-14

    def test_shortcut_forms(self):
        spec = spectrum(zero_model())
        assert logdet_term_paper(spec, 0.5).regularizer == pytest.approx(math.log(2), abs=1e-15)

    def test_shortcut_and_corrected_differ(self, hand_model):
        spec = spectrum(hand_model)
        br = renyi_regularizer(hand_model, np.zeros(2), 0.5, spec)
        assert abs(br.total_paper - dense_oracle_regularizer(hand_model, np.zeros(2), 0.5)) > 0.1
        assert abs(br.total_paper - br.total_corrected) > 0.1


class TestRegularizer:
    def test_zero_loading(self):
        model = zero_model()
        for a in ALPHAS:
            br = renyi_regularizer(model, np.arange(4.0), a)
            assert br.total_corrected == 0.0
            assert br.total_paper == pytest.approx(math.log(1 / (1 - a)), abs=1e-15)
            assert dense_oracle_regularizer(model, np.arange(4.0), a) == 0.0

    def test_hand_dense(self, hand_model):
        x = np.array([3.0, 4.0])
        assert renyi_regularizer(hand_model, x, 0.5).total_corrected == pytest.approx(
            dense_oracle_regularizer(hand_model, x, 0.5), abs=1e-12
        )

    @given(seeds, st.floats(0.05, 0.95))
    def test_equals_divergence_core(self, seed, a):
        model, x = model_from_seed(seed)
        w, q = posterior(model, x), GaussianN.standard(model.n_y)
        br = renyi_regularizer(model, x, a)
        assert br.total_corrected == pytest.approx(renyi_divergence_gaussian(q, w, 1 - a), rel=1e-10, abs=1e-12)
        assert br.total_corrected == pytest.approx((1 - a) / a * renyi_divergence_gaussian(w, q, a), rel=1e-10, abs=1e-12)
        assert br.total_corrected >= 0 and br.scalar_term >= 0
        assert br.order_used.alpha == pytest.approx(1 - a)

    @given(seeds, st.floats(0.05, 0.95))
    def test_fast_matches_dense(self, seed, a):
        model, x = model_from_seed(seed, max_nx=64, max_ny=8)
        fast = renyi_regularizer(model, x, a).total_corrected
        dense = dense_oracle_regularizer(model, x, a)
        assert abs(fast - dense) <= 1e-10 * max(1.0, abs(dense))

    @given(seeds)
    def test_nonincreasing_in_alpha(self, seed):
        model, x = model_from_seed(seed)
        totals = [renyi_regularizer(model, x, a).total_corrected for a in ALPHAS]
        assert np.all(np.diff(totals) <= 1e-12)

    def test_dense_guard(self):
        model = PpcaModel(np.ones((513, 1)), 1.0)
        with pytest.raises(DimensionError):
            dense_oracle_regularizer(model, np.zeros(513), 0.5)


class TestEvidence:
    def test_hand_value(self, hand_model):
        assert log_evidence(hand_model, np.zeros(2)) == pytest.approx(EVIDENCE_345_AT_ZERO, abs=1e-14)

    @given(seeds)
    def test_matches_dense(self, seed):
        model, x = model_from_seed(seed)
        c, s = model.loading, model.noise_std
        dense = GaussianN(np.zeros(model.n_x), c @ c.T + s**2 * np.eye(model.n_x)).logpdf(x)[0]
        assert log_evidence(model, x) == pytest.approx(dense, rel=1e-10)

    def test_normalizes_in_one_dimension(self):
        from scipy.integrate import quad

        model = PpcaModel(np.array([[1.3]]), 0.7)
        total, _ = quad(lambda t: math.exp(log_evidence(model, np.array([t]))), -40, 40, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestSamplingAndFit:
    def test_empty_and_deterministic(self, hand_model):
        assert sample_data(hand_model, 0, 1).shape == (0, 2)
        assert_allclose(sample_data(hand_model, 5, 9), sample_data(hand_model, 5, 9))

    def test_sample_covariance(self):
        model = random_model(np.random.default_rng(0), 6, 2, 2.0, 1.0)
        data = sample_data(model, 100_000, 1)
        target = model.loading @ model.loading.T + np.eye(6)
        assert np.linalg.norm(np.cov(data, rowvar=False) - target) <= 0.05 * np.linalg.norm(target)

    def test_round_trip_spectrum(self):
        truth = random_model(np.random.default_rng(1), 10, 3, 3.0, 1.0)
        fitted = fit_from_data(sample_data(truth, 100_000, 2), 3)
        assert_allclose(spectrum(fitted).singular_values, spectrum(truth).singular_values, rtol=0.1)

    def test_isotropic_data(self):
        # spurious lambda shrinks like (N_x / n)^(1/4), so n must be large
        data = np.random.default_rng(4).standard_normal((1_000_000, 8))
        fitted = fit_from_data(data, 2, allow_degenerate=True)
        assert np.all(spectrum(fitted).singular_values < 0.1)

    def test_refit_stable(self):
        truth = random_model(np.random.default_rng(5), 12, 2, 3.0, 1.0)
        a = fit_from_data(sample_data(truth, 50_000, 6), 2)
        b = fit_from_data(sample_data(truth, 50_000, 7), 2)
        assert_allclose(spectrum(a).singular_values, spectrum(b).singular_values, rtol=0.1)

    def test_bad_latent_dim(self):
        with pytest.raises(DimensionError):
            fit_from_data(np.zeros((10, 3)), 3)
