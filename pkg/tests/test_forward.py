import math

import numpy as np
import numpy.testing as npt
import pytest

from gmsmooth.backward import LogQuadLikelihood, backward_pass
from gmsmooth.baselines import smoothing_oracle
from gmsmooth.forward import (
    fuse_initial,
    log_path_posterior,
    propagate_marginals,
    smooth,
)
from gmsmooth.linalg import LOG_2PI, gaussian_logpdf, pseudo_logdet
from gmsmooth.model import FlatEverywhere, FlatOnSupport, Proper

from conftest import random_model
from test_model import scalar_random_walk


class TestFuseInitial:
    def test_proper_scalar(self):
        lik0 = LogQuadLikelihood(-0.5 * LOG_2PI, [1.0], [[1.0]])
        post, log_l = fuse_initial(lik0, Proper([0.0], [[1.0]]))
        npt.assert_allclose(log_l, gaussian_logpdf([1.0], [0.0], [[2.0]]), atol=1e-12)
        npt.assert_allclose(post.mean, [0.5])
        npt.assert_allclose(post.cov, [[0.5]], atol=1e-12)

    def test_flat_on_support_full_rank_scalar(self):
        lik0 = LogQuadLikelihood(-0.5 * LOG_2PI, [2.0], [[1.0]])
        post, log_l = fuse_initial(lik0, FlatOnSupport())
        npt.assert_allclose(post.mean, [2.0])
        npt.assert_allclose(post.cov, [[1.0]])
        assert post.rank == 1
        npt.assert_allclose(log_l, 0.0, atol=1e-12)

    def test_empty_likelihood_proper(self):
        prior = Proper([1.0, 2.0], np.diag([1.0, 2.0]))
        post, log_l = fuse_initial(LogQuadLikelihood.empty(2), prior)
        assert log_l == 0.0
        npt.assert_array_equal(post.mean, prior.mean)
        npt.assert_array_equal(post.cov, prior.cov)

    def test_flat_everywhere_infinite_evidence(self):
        lik0 = LogQuadLikelihood(-0.5 * LOG_2PI, [2.0], [[1.0]])
        post, log_l = fuse_initial(lik0, FlatEverywhere())
        assert math.isinf(log_l)
        npt.assert_allclose(post.mean, [2.0])

    def test_flat_on_support_evidence_formula(self, rng):
        lik0 = LogQuadLikelihood(
            rng.standard_normal(), rng.standard_normal(2), rng.standard_normal((2, 3))
        )
        post, log_l = fuse_initial(lik0, FlatOnSupport())
        logdet, rank = pseudo_logdet(post.cov)
        npt.assert_allclose(log_l, lik0.log_c + 0.5 * (rank * LOG_2PI + logdet))


class TestPropagateMarginals:
    def test_no_transitions(self):
        from gmsmooth.forward import GaussianMarginal

        post0 = GaussianMarginal([1.0], [[2.0]])
        result = propagate_marginals(post0, [])
        assert len(result.marginals) == 1
        assert result.marginals[0] is post0

    def test_identity_kernels(self, rng):
        from gmsmooth.backward import PosteriorTransition
        from gmsmooth.forward import GaussianMarginal

        post0 = GaussianMarginal(rng.standard_normal(2), np.eye(2))
        kernels = [
            PosteriorTransition(np.eye(2), np.zeros(2), np.zeros((2, 2)))
            for _ in range(4)
        ]
        result = propagate_marginals(post0, kernels)
        for marg in result.marginals:
            npt.assert_allclose(marg.mean, post0.mean)
            npt.assert_allclose(marg.cov, post0.cov)

    def test_scalar_model_matches_oracle(self, rng):
        model = scalar_random_walk(horizon=5, values=list(rng.standard_normal(5)))
        result = smooth(model)
        oracle_marginals, _, _ = smoothing_oracle(model)
        for a, b in zip(result.marginals, oracle_marginals):
            npt.assert_allclose(a.mean, b.mean, atol=1e-8)
            npt.assert_allclose(a.cov, b.cov, atol=1e-8)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_models_match_oracle(self, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, missing_frac=0.2)
        result = smooth(model)
        oracle_marginals, _, evidence = smoothing_oracle(model)
        npt.assert_allclose(result.log_marginal_likelihood, evidence, atol=1e-8)
        for a, b in zip(result.marginals, oracle_marginals):
            npt.assert_allclose(a.mean, b.mean, atol=1e-8)
            npt.assert_allclose(a.cov, b.cov, atol=1e-8)


class TestLogPathPosterior:
    def test_horizon_zero_proper(self):
        from gmsmooth.forward import GaussianMarginal

        post0 = GaussianMarginal([1.0], [[2.0]])
        result = propagate_marginals(post0, [])
        x0 = np.array([0.3])
        npt.assert_allclose(
            log_path_posterior(result, [x0]), gaussian_logpdf(x0, [1.0], [[2.0]])
        )

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_oracle_joint_posterior(self, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, zero_q_frac=0.0, singular_phi_frac=0.2)
        result = smooth(model)
        from gmsmooth.baselines import build_joint, condition_joint

        mean, cov, evidence = condition_joint(build_joint(model))
        n = model.state_dim
        for _ in range(10):
            path = [rng.standard_normal(n) for _ in range(model.horizon + 1)]
            flat = np.concatenate(path)
            expected = gaussian_logpdf(flat, mean, cov + 1e-13 * np.eye(cov.shape[0]))
            got = log_path_posterior(result, path, model)
            npt.assert_allclose(got, expected, atol=1e-7)

    def test_off_support_point_rejected(self):
        from gmsmooth.backward import DegenerateGaussian

        post0 = DegenerateGaussian(
            [0.0, 0.0], np.diag([1.0, 0.0]), 1, np.array([[1.0], [0.0]])
        )
        result = propagate_marginals(post0, [], initial_posterior_kind="degenerate-on-support")
        with pytest.raises(ValueError, match="off the support"):
            log_path_posterior(result, [np.array([0.0, 1.0])])

    @pytest.mark.parametrize("seed", range(5))
    def test_bayes_consistency(self, seed):
        # log L + log posterior(path) = log prior(path) + sum log h_t(y_t)
        rng = np.random.default_rng(seed)
        model = random_model(rng, zero_q_frac=0.0, singular_phi_frac=0.2)
        result = smooth(model)
        n = model.state_dim
        for _ in range(10):
            path = [rng.standard_normal(n) for _ in range(model.horizon + 1)]
            lhs = result.log_marginal_likelihood + log_path_posterior(result, path, model)
            rhs = gaussian_logpdf(path[0], model.initial.mean, model.initial.cov + 1e-13 * np.eye(n))
            for t in range(1, model.horizon + 1):
                tr = model.transition(t)
                rhs += gaussian_logpdf(
                    path[t], tr.phi @ path[t - 1] + tr.offset, tr.noise_cov
                )
                rec = model.observation(t)
                if not rec.is_missing:
                    rhs += gaussian_logpdf(
                        rec.value, rec.model.c @ path[t], rec.model.noise_cov
                    )
            npt.assert_allclose(lhs, rhs, atol=1e-7)


class TestFlatPriorLimit:
    @pytest.mark.parametrize("seed", range(5))
    def test_diffuse_proper_prior_converges(self, seed):
        rng = np.random.default_rng(seed)
        # enough observations so the x0-likelihood has full rank n
        model = random_model(
            rng, n=2, horizon=6, zero_q_frac=0.0, singular_phi_frac=0.0
        )
        backward = backward_pass(model)
        lik0 = backward.initial_likelihood
        sv = np.linalg.svd(lik0.c_bar, compute_uv=False)
        if sv.size < model.state_dim or sv.min() < 0.05:
            pytest.skip("x0-likelihood not solidly full rank for this draw")

        model.initial = FlatOnSupport()
        flat = smooth(model)

        model.initial = Proper(np.zeros(model.state_dim), 1e8 * np.eye(model.state_dim))
        diffuse = smooth(model)

        for a, b in zip(flat.marginals, diffuse.marginals):
            scale = max(1.0, np.abs(b.mean).max())
            npt.assert_allclose(a.mean, b.mean, atol=1e-4 * scale)
            cscale = max(1.0, np.abs(b.cov).max())
            npt.assert_allclose(a.cov, b.cov, atol=1e-4 * cscale)

    def test_flat_everywhere_marginals_match_flat_on_support(self, rng):
        model = random_model(rng, n=2, horizon=6, zero_q_frac=0.0, singular_phi_frac=0.0)
        model.initial = FlatOnSupport()
        a = smooth(model)
        model.initial = FlatEverywhere()
        b = smooth(model)
        assert math.isinf(b.log_marginal_likelihood)
        assert math.isfinite(a.log_marginal_likelihood)
        for ma, mb in zip(a.marginals, b.marginals):
            npt.assert_allclose(ma.mean, mb.mean)
            npt.assert_allclose(ma.cov, mb.cov)
