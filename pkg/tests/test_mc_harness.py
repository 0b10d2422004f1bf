import math

import numpy as np
import pytest

from epca_decomp.kl_core import (
    DiagGaussian,
    cost_f,
    eigen_to_full_kl,
    kl_diag,
    kl_isotropic_to_truncated,
)
from epca_decomp.mc_harness import (
    build_diamond_model,
    build_eigen_model,
    decompose,
    e_mixture,
    empirical_ge_curve,
    m_projection,
    sample_wishart,
    variance_term,
)
from epca_decomp.mp_spectrum import MPSpectrum, edges, tail_mass


class TestSampleWishart:
    def test_deterministic(self):
        a = sample_wishart(8, 16, seed=3, realization_id=5)
        b = sample_wishart(8, 16, seed=3, realization_id=5)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.frame, b.frame)

    def test_streams_differ(self):
        a = sample_wishart(8, 16, seed=3, realization_id=0)
        b = sample_wishart(8, 16, seed=3, realization_id=1)
        assert not np.array_equal(a.eigenvalues, b.eigenvalues)

    def test_sorted_descending_and_orthonormal(self):
        s = sample_wishart(10, 20, seed=0, realization_id=0)
        assert np.all(np.diff(s.eigenvalues) <= 0)
        assert np.allclose(s.frame.T @ s.frame, np.eye(10), atol=1e-12)
        sigma = (s.frame * s.eigenvalues) @ s.frame.T
        assert np.allclose(sigma, sigma.T, atol=1e-14)

    def test_scalar_concentrates(self):
        # N_V = 1: the single eigenvalue is a chi^2_D / D mean, sd sqrt(2/D)
        d = 1_000_000
        s = sample_wishart(1, d, seed=11, realization_id=0)
        assert s.eigenvalues[0] == pytest.approx(1.0, abs=5 * math.sqrt(2.0 / d))

    def test_argument_errors(self):
        with pytest.raises(ValueError):
            sample_wishart(8, 8, seed=0, realization_id=0)
        with pytest.raises(ValueError):
            sample_wishart(8, 16, seed=-1, realization_id=0)

    def test_spectrum_matches_mp_law(self):
        # pooled eigenvalues over many realizations vs the asymptotic tail mass
        n_v, d = 64, 96
        eigs = np.concatenate(
            [
                sample_wishart(n_v, d, seed=12345, realization_id=m).eigenvalues
                for m in range(200)
            ]
        )
        spec = MPSpectrum(n_v / d)
        lo, hi = edges(spec)
        for cut in np.linspace(lo + 0.1, hi - 0.1, 5):
            empirical = np.mean(eigs > cut)
            assert empirical == pytest.approx(tail_mass(spec, cut), abs=0.02)


class TestModels:
    def test_full_rank_eigen_model_reconstructs(self):
        s = sample_wishart(6, 12, seed=4, realization_id=0)
        model = build_eigen_model(s, 6, 0.5)
        sigma = (s.frame * s.eigenvalues) @ s.frame.T
        assert np.allclose(model.covariance(), sigma, atol=1e-12)

    def test_rank_zero_is_isotropic_eps(self):
        s = sample_wishart(6, 12, seed=4, realization_id=0)
        model = build_eigen_model(s, 0, 0.5)
        assert np.allclose(model.covariance(), 0.5 * np.eye(6), atol=1e-12)
        assert eigen_to_full_kl(model) == pytest.approx(
            3.0 * (cost_f(0.5) - 1.0), abs=1e-12
        )

    def test_eigen_and_diamond_kl_agree_per_realization(self):
        s = sample_wishart(12, 18, seed=7, realization_id=3)
        for n_k in (0, 3, 7, 12):
            eigen = build_eigen_model(s, n_k, 0.5)
            diamond = build_diamond_model(s, n_k, 0.5)
            assert eigen_to_full_kl(eigen) == pytest.approx(
                kl_diag(np.ones(12), diamond.variances), abs=1e-12
            )

    def test_large_eps_resorts_eigenpairs(self):
        s = sample_wishart(6, 12, seed=4, realization_id=1)
        eps = 10.0  # exceeds every empirical eigenvalue
        model = build_eigen_model(s, 3, eps)
        assert np.all(np.diff(model.eigenvalues) <= 0)
        expected = np.diag(np.concatenate([s.eigenvalues[:3], np.full(3, eps)]))
        rotated = s.frame @ expected @ s.frame.T
        assert np.allclose(model.covariance(), rotated, atol=1e-12)

    def test_bounds(self):
        s = sample_wishart(4, 8, seed=0, realization_id=0)
        with pytest.raises(ValueError):
            build_eigen_model(s, 5, 0.5)
        with pytest.raises(ValueError):
            build_diamond_model(s, -1, 0.5)
        with pytest.raises(ValueError):
            build_eigen_model(s, 2, 0.0)


class TestMProjection:
    def test_kl_equals_model_error(self):
        from epca_decomp.epca_theory import model_error

        for n_v, n_k, eps in [(8, 3, 0.5), (5, 0, 0.2), (5, 5, 0.7)]:
            q0 = m_projection(n_v, n_k, eps)
            kl = kl_diag(np.ones(n_v), q0.variances)
            assert kl == pytest.approx(model_error(n_k / n_v, eps, n_v), abs=1e-13)

    def test_is_closest_family_point(self):
        # brute-force check: perturbing any free variance increases the KL
        n_v, n_k, eps = 4, 2, 0.3
        q0 = m_projection(n_v, n_k, eps)
        base = kl_diag(np.ones(n_v), q0.variances)
        for i in range(n_k):
            for delta in (-0.05, 0.05):
                v = q0.variances.copy()
                v[i] += delta
                assert kl_diag(np.ones(n_v), v) > base


class TestEMixture:
    def test_single_model_identity(self):
        q = DiagGaussian(np.array([0.5, 2.0]))
        mix = e_mixture([q])
        assert np.allclose(mix.variances, q.variances, atol=1e-15)
        assert mix.f_bar == pytest.approx(0.0, abs=1e-15)

    def test_two_scalar_models(self):
        mix = e_mixture([DiagGaussian(np.array([1.0])), DiagGaussian(np.array([3.0]))])
        assert mix.variances[0] == pytest.approx(1.5, abs=1e-15)
        expected = 0.5 * (0.5 * math.log(3.0) + math.log(2.0 / 3.0))
        assert mix.f_bar == pytest.approx(expected, abs=1e-15)
        assert mix.f_bar == pytest.approx(0.0719205, abs=1e-7)

    def test_identical_models_zero_fbar(self):
        q = DiagGaussian(np.array([0.7, 1.3, 2.0]))
        mix = e_mixture([q, q, q])
        assert mix.f_bar == pytest.approx(0.0, abs=1e-14)

    def test_fbar_non_negative_random(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            models = [
                DiagGaussian(rng.uniform(0.1, 5.0, 6)) for _ in range(5)
            ]
            assert e_mixture(models).f_bar >= 0.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            e_mixture([])

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            e_mixture([DiagGaussian(np.ones(2)), DiagGaussian(np.ones(3))])


class TestVarianceTerm:
    def test_equals_fbar_two_models(self):
        models = [
            DiagGaussian(np.array([0.5, 2.0])),
            DiagGaussian(np.array([1.5, 0.8])),
        ]
        mix = e_mixture(models)
        assert variance_term(mix, models) == pytest.approx(mix.f_bar, abs=1e-13)

    def test_equals_fbar_many_realizations(self):
        models = [
            build_diamond_model(sample_wishart(16, 24, 5, m), 9, 0.5)
            for m in range(40)
        ]
        mix = e_mixture(models)
        assert variance_term(mix, models) == pytest.approx(mix.f_bar, abs=1e-11)


class TestDecompose:
    def test_rank_zero_pure_model_error(self):
        res = decompose(8, 16, eps=0.5, n_keep=0, n_realizations=5, seed=1)
        assert res.ge == pytest.approx(4.0 * (cost_f(0.5) - 1.0), abs=1e-13)
        assert res.model_error == res.ge
        assert res.data_bias == 0.0
        assert res.variance == 0.0

    def test_additive_identity(self):
        for n_k in (0, 4, 8, 12, 16):
            res = decompose(16, 24, eps=0.5, n_keep=n_k, n_realizations=50, seed=2)
            assert abs(res.residual) < 1e-12
            assert res.data_bias >= -1e-12
            assert res.variance >= -1e-12

    def test_matches_direct_construction(self):
        # rebuild every piece from first principles on a small configuration
        n_v, d, eps, n_k, m_count, seed = 6, 12, 0.5, 3, 20, 9
        samples = [sample_wishart(n_v, d, seed, m) for m in range(m_count)]
        diamonds = [build_diamond_model(s, n_k, eps) for s in samples]
        ge = np.mean(
            [kl_diag(np.ones(n_v), q.variances) for q in diamonds]
        )
        q0 = m_projection(n_v, n_k, eps)
        me = kl_diag(np.ones(n_v), q0.variances)
        mix = e_mixture(diamonds)
        bias = kl_diag(q0.variances, mix.variances)
        var = variance_term(mix, diamonds)
        res = decompose(n_v, d, eps, n_k, m_count, seed)
        assert res.ge == pytest.approx(ge, abs=1e-12)
        assert res.model_error == pytest.approx(me, abs=1e-13)
        assert res.data_bias == pytest.approx(bias, abs=1e-11)
        assert res.variance == pytest.approx(var, abs=1e-11)
        assert ge - me - bias - var == pytest.approx(0.0, abs=1e-11)

    def test_deterministic(self):
        a = decompose(8, 16, 0.5, 4, 10, seed=3)
        b = decompose(8, 16, 0.5, 4, 10, seed=3)
        assert a == b

    def test_argument_errors(self):
        with pytest.raises(ValueError):
            decompose(8, 16, 0.5, 9, 10, 0)
        with pytest.raises(ValueError):
            decompose(8, 16, -0.5, 4, 10, 0)
        with pytest.raises(ValueError):
            decompose(8, 16, 0.5, 4, 0, 0)


@pytest.fixture(scope="module")
def small_curve():
    return empirical_ge_curve(16, 24, eps=0.5, n_realizations=60, seed=2024)


class TestEmpiricalGECurve:
    def test_shape_and_ranks(self, small_curve):
        assert len(small_curve.points) == 17
        assert [p.n_k for p in small_curve.points] == list(range(17))

    def test_rotational_equivalence(self, small_curve):
        assert small_curve.max_rot_deviation < 1e-10

    def test_additive_identity(self, small_curve):
        assert small_curve.max_residual < 1e-12

    def test_full_rank_empirical_ge(self, small_curve):
        # at full rank the diamond GE is the plain truncation-free average
        eigs = np.stack(
            [
                sample_wishart(16, 24, 2024, m).eigenvalues
                for m in range(60)
            ]
        )
        expected = np.mean(
            [kl_isotropic_to_truncated(row, 16, 0.5) for row in eigs]
        )
        assert small_curve.points[16].ge_empirical_diamond == pytest.approx(
            expected, abs=1e-12
        )

    def test_rank_zero_matches_closed_form(self, small_curve):
        p0 = small_curve.points[0]
        closed = 8.0 * (cost_f(0.5) - 1.0)
        assert p0.ge_empirical_diamond == pytest.approx(closed, abs=1e-12)
        assert p0.ge_empirical_eigen == pytest.approx(closed, abs=1e-12)
        assert p0.ge_asymptotic == pytest.approx(closed, abs=1e-12)

    def test_asymptotic_tracks_empirical_low_rank(self, small_curve):
        # the asymptotic form drops the finite-sample variance term, which
        # dominates at high rank; at low/mid rank the curves agree to a few
        # percent of the rank-0 value even for moderate N_V
        scale = small_curve.points[0].ge_asymptotic
        for p in small_curve.points[: len(small_curve.points) // 2]:
            assert abs(p.ge_empirical_diamond - p.ge_asymptotic) < 0.05 * scale

    def test_argmin_consistent(self, small_curve):
        eig_argmin = small_curve.argmin_n_k("eigen")
        dia_argmin = small_curve.argmin_n_k("diamond")
        assert abs(eig_argmin - dia_argmin) <= 1
