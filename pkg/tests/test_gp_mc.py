import numpy as np
import pytest
import scipy.linalg

import gpinfer as gpi
from gpinfer.errors import ConfigurationError, InputError
from gpinfer.likelihoods import Flat as FlatLik
from gpinfer.linalg import chol_directional_derivative

from conftest import central_fd

LOG_HALF = -0.6931471805599453


def bernoulli_gp(rng, n=8, d=2):
    X = rng.uniform(-2, 2, size=(d, n))
    y = (rng.uniform(size=n) < 0.5).astype(float)
    kern = gpi.Matern32Ard(rng.uniform(-0.5, 0.5, size=d), 0.2)
    return gpi.GPMC(X, y, gpi.MeanZero(), kern, gpi.Bernoulli())


class TestTarget:
    def test_assembled_from_closed_forms(self, rng):
        n = 6
        X = rng.uniform(-2, 2, size=(1, n))
        y = np.ones(n)
        gp = gpi.GPMC(X, y, gpi.MeanZero(), gpi.SEIso(0.0, 0.0), gpi.Bernoulli())
        want = n * LOG_HALF - 0.5 * n * np.log(2 * np.pi)  # v = 0 at start
        assert gp.log_posterior() == pytest.approx(want, abs=1e-12)

    def test_cache_coherent_after_set_params(self, rng):
        gp = bernoulli_gp(rng)
        state = rng.normal(size=gp.n_params) * 0.3
        gp.set_params(state)
        cached = gp.log_posterior()
        assert gp.update_target() == pytest.approx(cached, abs=1e-10)

    def test_set_params_roundtrip_and_restore(self, rng):
        gp = bernoulli_gp(rng)
        orig = gp.get_params().copy()
        t0 = gp.log_posterior()
        gp.set_params(rng.normal(size=gp.n_params))
        assert gp.log_posterior() != pytest.approx(t0)
        gp.set_params(orig)
        assert np.array_equal(gp.get_params(), orig)
        assert gp.log_posterior() == pytest.approx(t0, abs=1e-12)

    def test_masked_params_absent_from_state(self, rng):
        X = rng.uniform(-1, 1, size=(1, 5))
        y = np.zeros(5)
        kern = gpi.fix(gpi.SEIso(0.3, 0.1))  # nothing trainable
        gp = gpi.GPMC(X, y, gpi.MeanZero(), kern, FlatLik())
        assert gp.n_theta == 0
        assert gp.n_params == 5
        assert gp.grad_log_posterior().shape == (5,)

    def test_wrong_state_length(self, rng):
        gp = bernoulli_gp(rng)
        with pytest.raises(ConfigurationError):
            gp.set_params(np.zeros(gp.n_params + 1))

    def test_response_checked(self, rng):
        X = rng.uniform(-1, 1, size=(1, 4))
        with pytest.raises(InputError):
            gpi.GPMC(X, [0.0, 1.0, 2.0, 0.0], gpi.MeanZero(), gpi.SEIso(),
                     gpi.Bernoulli())

    def test_importance_sampling_recovers_exact_marginal(self, rng):
        # with a Gaussian likelihood, integrating exp(log_posterior) over v
        # must reproduce the exact-GP marginal likelihood
        n = 5
        X = rng.uniform(-2, 2, size=(1, n))
        y = rng.normal(size=n)
        kern = gpi.fix(gpi.SEIso(0.1, 0.2))
        lik = gpi.Gaussian(-0.3, trainable=False)
        gp = gpi.GPMC(X, y, gpi.MeanZero(), kern, lik)

        exact = gpi.GPExact(X, y, gpi.MeanZero(), gpi.SEIso(0.1, 0.2),
                            log_noise=-0.3)

        draws = 200000
        V = np.random.default_rng(42).standard_normal((draws, n))
        F = V @ gp.chol.T  # zero mean
        loglik = gp.likelihood.log_density(y[None, :], F).sum(axis=1)
        w = np.exp(loglik)
        est = w.mean()
        se = w.std(ddof=1) / np.sqrt(draws)
        assert abs(est - np.exp(exact.log_marginal())) < 3 * se


class TestGradient:
    def test_chol_directional_derivative_oracle(self, rng):
        n = 7
        A = rng.normal(size=(n, n))
        K = A @ A.T + n * np.eye(n)
        L = np.linalg.cholesky(K)
        S = rng.normal(size=(n, n))
        dK = S + S.T
        dL = chol_directional_derivative(L, dK)
        eps = 1e-6
        Lp = np.linalg.cholesky(K + eps * dK)
        Lm = np.linalg.cholesky(K - eps * dK)
        fd = (Lp - Lm) / (2 * eps)
        assert np.allclose(dL, fd, atol=1e-6)

    def test_v_gradient_closed_form(self, rng):
        X = rng.uniform(-1, 1, size=(1, 6))
        gp = gpi.GPMC(X, np.zeros(6), gpi.MeanZero(), gpi.SEIso(0.0, 0.0),
                      FlatLik())
        # flat likelihood: gradient of the whitened prior is -v
        v = rng.normal(size=6)
        gp.set_params(np.concatenate([v, gp.kernel.get_params()]))
        g = gp.grad_log_posterior()
        assert np.allclose(g[:6], -v, atol=1e-12)

    @pytest.mark.parametrize("lik_factory,draw", [
        (lambda: gpi.Bernoulli(), lambda rng, n: (rng.uniform(size=n) < 0.5).astype(float)),
        (lambda: gpi.Binomial(5), lambda rng, n: rng.integers(0, 6, size=n).astype(float)),
        (lambda: gpi.Exponential(), lambda rng, n: rng.gamma(2.0, 1.0, size=n) + 1e-3),
        (lambda: gpi.Gaussian(0.2), lambda rng, n: rng.normal(size=n)),
        (lambda: gpi.Poisson(), lambda rng, n: rng.poisson(2.0, size=n).astype(float)),
        (lambda: gpi.StudentT(3.0, 0.1), lambda rng, n: rng.normal(size=n)),
    ])
    def test_full_gradient_matches_fd(self, lik_factory, draw, rng):
        n = 7
        X = rng.uniform(-2, 2, size=(2, n))
        y = draw(rng, n)
        kern = gpi.SEArd([0.2, -0.1], 0.1)
        mean = gpi.MeanConst(0.1)
        gp = gpi.GPMC(X, y, mean, kern, lik_factory())
        gp.set_params(rng.normal(size=gp.n_params) * 0.4)
        ana = gp.grad_log_posterior()
        state0 = gp.get_params().copy()

        def at(s):
            gp.set_params(s)
            try:
                return gp.log_posterior()
            finally:
                gp.set_params(state0)

        fd = central_fd(at, state0)
        assert np.allclose(ana, fd, rtol=1e-5, atol=1e-6), repr(gp.likelihood)

    def test_gradient_with_priors(self, rng):
        gp = bernoulli_gp(rng, n=6)
        gpi.set_priors(gp.kernel, [gpi.Normal(0.0, 2.0)] * gp.kernel.n_params)
        gp.update_target()
        state0 = gp.get_params().copy()
        ana = gp.grad_log_posterior()

        def at(s):
            gp.set_params(s)
            try:
                return gp.log_posterior()
            finally:
                gp.set_params(state0)

        fd = central_fd(at, state0)
        assert np.allclose(ana, fd, rtol=1e-5, atol=1e-6)


class _GaussianTarget:
    """Test adapter: arbitrary Gaussian target for the HMC driver."""

    def __init__(self, cov):
        self.prec = np.linalg.inv(cov)
        self.x = np.zeros(cov.shape[0])

    def _hmc_state(self):
        return self.x.copy()

    def _hmc_set_state(self, x):
        self.x = np.asarray(x, dtype=float).copy()

    def _hmc_target(self):
        return -0.5 * float(self.x @ self.prec @ self.x)

    def _hmc_grad(self):
        return -self.prec @ self.x


class TestHMC:
    def test_kept_sample_count(self, rng):
        gp = bernoulli_gp(rng, n=4, d=1)
        cfg = gpi.HMCConfig(epsilon=0.05, n_iter=101, burn=11, thin=7, seed=1)
        samples = gpi.mcmc(gp, cfg)
        assert samples.shape == (gp.n_params, int(np.ceil((101 - 11) / 7)))

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            gpi.HMCConfig(epsilon=-1.0).validate()
        with pytest.raises(ConfigurationError):
            gpi.HMCConfig(L_min=3, L_max=2).validate()
        with pytest.raises(ConfigurationError):
            gpi.HMCConfig(burn=10, n_iter=10).validate()

    def test_tiny_step_single_leapfrog_accepts_everything(self, rng):
        gp = bernoulli_gp(rng, n=4, d=1)
        samples = gpi.mcmc(gp, epsilon=1e-6, L_min=1, L_max=1, n_iter=200, seed=2)
        moved = np.any(np.diff(samples, axis=1) != 0.0, axis=0)
        assert moved.all()  # epsilon -> 0 with L = 1: acceptance rate -> 1

    def test_prior_recovery_flat_likelihood(self, rng):
        # likelihood contributes 0, so the chain must sample v ~ N(0, I)
        n = 4
        X = np.linspace(0, 1, n).reshape(1, -1)
        kern = gpi.fix(gpi.SEIso(0.0, 0.0))
        gp = gpi.GPMC(X, np.zeros(n), gpi.MeanZero(), kern, FlatLik())
        samples = gpi.mcmc(gp, epsilon=0.8, L_min=5, L_max=15, n_iter=4000,
                           burn=500, thin=1, seed=3)
        kept = samples.shape[1]
        mean = samples.mean(axis=1)
        var = samples.var(axis=1, ddof=1)
        se_mean = samples.std(axis=1, ddof=1) / np.sqrt(kept)
        se_var = np.sqrt(2.0 / (kept - 1))
        assert np.all(np.abs(mean) < 3 * se_mean)
        assert np.all(np.abs(var - 1.0) < 3 * se_var)

    def test_2d_correlated_gaussian_covariance(self):
        cov = np.array([[1.0, 0.6], [0.6, 0.5]])
        target = _GaussianTarget(cov)
        samples = gpi.mcmc(target, epsilon=0.25, L_min=5, L_max=15,
                           n_iter=12000, burn=2000, thin=2, seed=4)
        emp = np.cov(samples)
        kept = samples.shape[1]
        se = 3.0 * np.sqrt(2.0 / kept)
        assert np.allclose(emp, cov, atol=3 * se)

    def test_nonfinite_initial_target(self, rng):
        gp = bernoulli_gp(rng, n=4, d=1)
        gpi.set_priors(gp.kernel, [gpi.Uniform(-0.05, 0.05)] * gp.kernel.n_params)
        gp.update_target()  # kernel params start outside the box
        with pytest.raises(InputError):
            gpi.mcmc(gp, n_iter=10)

    def test_uniform_prior_constrains_chain(self, rng):
        X = rng.uniform(-1, 1, size=(1, 4))
        y = (rng.uniform(size=4) < 0.5).astype(float)
        kern = gpi.SEIso(0.0, 0.0)
        gpi.set_priors(kern, [gpi.Uniform(-0.5, 0.5), gpi.Uniform(-0.5, 0.5)])
        gp = gpi.GPMC(X, y, gpi.MeanZero(), kern, gpi.Bernoulli())
        samples = gpi.mcmc(gp, epsilon=0.3, n_iter=500, seed=5)
        kern_rows = samples[-2:, :]
        assert np.all(kern_rows >= -0.5) and np.all(kern_rows <= 0.5)

    def test_exact_gp_hyperparameter_chain(self):
        # the hyperparameter posterior should concentrate near the ML fit
        rng = np.random.default_rng(13579)
        x = 2 * np.pi * rng.uniform(size=10)
        y = np.sin(x) + 0.05 * rng.normal(size=10)
        gp = gpi.GPExact(x, y, gpi.MeanZero(), gpi.SEIso(0.0, 0.0), log_noise=-1.0)
        gpi.optimize(gp)
        ml = gp.get_params().copy()

        gp2 = gpi.GPExact(x, y, gpi.MeanZero(), gpi.SEIso(0.0, 0.0), log_noise=-1.0)
        gpi.set_priors(gp2.kernel, [gpi.Normal(0.0, 1.0), gpi.Normal(0.0, 1.0)])
        samples = gpi.mcmc(gp2, epsilon=0.06, L_min=5, L_max=15, n_iter=3000,
                           burn=500, thin=5, seed=6)
        post_mean = samples.mean(axis=1)
        assert np.all(np.abs(post_mean - ml) < 0.5)

    def test_whitening_pushforward_covariance(self, rng):
        n = 3
        X = np.array([[0.0, 0.7, 1.9]])
        kern = gpi.SEIso(0.1, 0.2)
        gp = gpi.GPMC(X, np.zeros(n), gpi.MeanZero(), kern, FlatLik())
        draws = 10000
        V = np.random.default_rng(8).standard_normal((draws, n))
        F = V @ gp.chol.T
        emp = np.cov(F.T)
        want = kern.gram(X)
        scale = np.exp(2 * 0.2)
        assert np.all(np.abs(emp - want) < 3 * 2.5 * scale / np.sqrt(draws))


class TestMCPredict:
    def test_bernoulli_outputs_are_probabilities(self, rng):
        gp = bernoulli_gp(rng, n=6, d=1)
        samples = gpi.mcmc(gp, epsilon=0.1, n_iter=80, burn=20, thin=3, seed=7)
        Xs = rng.uniform(-2, 2, size=(1, 5))
        means = gpi.mc_predict_y(gp, samples, Xs)
        assert means.shape == (samples.shape[1], 5)
        assert np.all((means >= 0.0) & (means <= 1.0))

    def test_deterministic_given_samples(self, rng):
        gp = bernoulli_gp(rng, n=5, d=1)
        samples = gpi.mcmc(gp, epsilon=0.1, n_iter=40, seed=8)
        a = gpi.mc_predict_y(gp, samples, [[0.3, 0.9]], quad_order=20)
        b = gpi.mc_predict_y(gp, samples, [[0.3, 0.9]], quad_order=20)
        assert np.array_equal(a, b)

    def test_gaussian_likelihood_matches_exact_gp(self, rng):
        # all hyperparameters pinned, so the sampler only explores v; the
        # averaged predictive mean must agree with the analytic GP
        n = 8
        X = np.linspace(-2, 2, n).reshape(1, -1)
        y = np.sin(X[0]) + 0.1 * rng.normal(size=n)
        kern = gpi.fix(gpi.SEIso(0.0, 0.0))
        lik = gpi.Gaussian(np.log(0.2), trainable=False)
        gp = gpi.GPMC(X, y, gpi.MeanZero(), kern, lik)
        samples = gpi.mcmc(gp, epsilon=0.1, L_min=5, L_max=15, n_iter=6000,
                           burn=1000, thin=5, seed=9)
        Xs = np.array([[-1.3, 0.2, 1.7]])
        means, _ = gpi.mc_predict_y(gp, samples, Xs, include_var=True)

        exact = gpi.GPExact(X, y, gpi.MeanZero(), gpi.SEIso(0.0, 0.0),
                            log_noise=np.log(0.2))
        mu_exact, _ = exact.predict_y(Xs)
        mc_se = means.std(axis=0, ddof=1) / np.sqrt(means.shape[0])
        assert np.all(np.abs(means.mean(axis=0) - mu_exact) < 3 * mc_se + 1e-3)
