"""Monte Carlo inference for GPs with non-Gaussian observation models.

The latent function is whitened: f = m(X) + L v with L the lower
Cholesky factor of the kernel matrix and v ~ N(0, I), so the sampler
explores (v, theta) jointly.  Hyperparameter gradients flow through the
factorization via the forward-mode directional derivative of the
Cholesky factor.  The same Hamiltonian Monte Carlo driver also samples
exact-GP hyperparameters against the marginal likelihood.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigurationError, InputError, NumericalError
from .hyperopt import eval_priors
from .kernels import as_input_matrix
from .means import MeanZero

# the likelihood supplies no noise term, so factorizing K always needs
# a little diagonal inflation
_MC_JITTER_START = 1e-8


class GPMC:
    """Latent-GP model y_i ~ p(y | f_i, theta) with whitened MCMC state.

    The sampled state vector is (v, likelihood params, mean params,
    kernel params); `log_posterior` is the joint log-density up to a
    constant, log p(y | f) + log N(v; 0, I) + log p(theta).
    """

    def __init__(self, X, y, mean, kernel, likelihood):
        X = as_input_matrix(X)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != y.size:
            raise InputError(f"{X.shape[1]} inputs but {y.size} responses")
        if y.size < 1:
            raise InputError("need at least one observation")
        likelihood.check_response(y)
        self.X = X.copy()
        self.y = y.copy()
        self.mean = mean if mean is not None else MeanZero()
        self.kernel = kernel
        self.likelihood = likelihood
        self.v = np.zeros(y.size)
        self.update_target()

    @property
    def n_obs(self):
        return self.y.size

    @property
    def dim(self):
        return self.X.shape[0]

    @property
    def n_params(self):
        return self.n_obs + self.n_theta

    @property
    def n_theta(self):
        return (self.likelihood.n_params + self.mean.n_params
                + self.kernel.n_params)

    # -- state ---------------------------------------------------------------

    def get_params(self):
        return np.concatenate([self.v, self.likelihood.get_params(),
                               self.mean.get_params(), self.kernel.get_params()])

    def set_params(self, sample):
        """Install a sampled state (v, theta) and refresh the caches."""
        sample = np.asarray(sample, dtype=float).ravel()
        if sample.size != self.n_params:
            raise ConfigurationError(
                f"expected {self.n_params} state values, got {sample.size}")
        n = self.n_obs
        self.v = sample[:n].copy()
        k = n
        for comp in (self.likelihood, self.mean, self.kernel):
            comp.set_params(sample[k:k + comp.n_params])
            k += comp.n_params
        self.update_target()

    def param_names(self):
        return [f"v{i + 1}" for i in range(self.n_obs)] \
            + self.likelihood.param_names() + self.mean.param_names() \
            + self.kernel.param_names()

    def update_target(self):
        """Recompute L, f and the cached joint log-density from scratch."""
        K = self.kernel.gram(self.X)
        self.chol, self.jitter = linalg.chol_with_jitter(
            K, start_scale=_MC_JITTER_START, always_jitter=True)
        # the jitter scales with mean(diag K), so it moves with the kernel
        # parameters; gradients must see that dependence
        scale = float(np.mean(np.diag(K)))
        self._jitter_ratio = self.jitter / scale if scale > 0 else 0.0
        self.f = self.mean(self.X) + self.chol @ self.v
        loglik = float(np.sum(self.likelihood.log_density(self.y, self.f)))
        logv = -0.5 * float(self.v @ self.v) \
            - 0.5 * self.n_obs * np.log(2.0 * np.pi)
        self._target = loglik + logv + self._log_prior()
        return self._target

    def _log_prior(self):
        lp = eval_priors(self.likelihood.priors, self.likelihood.get_params())[0]
        lp += eval_priors(self.mean.priors, self.mean.get_params())[0]
        lp += eval_priors(self.kernel.priors, self.kernel.get_params())[0]
        return lp

    def log_posterior(self):
        """Cached joint log-density of the current state."""
        return self._target

    def grad_log_posterior(self):
        """Gradient of the joint log-density w.r.t. (v, theta)."""
        g_f = self.likelihood.dlog_df(self.y, self.f)
        grad = np.empty(self.n_params)
        n = self.n_obs
        grad[:n] = self.chol.T @ g_f - self.v

        k = n
        nl = self.likelihood.n_params
        if nl:
            own = self.likelihood.dlog_dtheta(self.y, self.f).sum(axis=-1)
            own += eval_priors(self.likelihood.priors,
                               self.likelihood.get_params())[1]
            grad[k:k + nl] = own
            k += nl
        nm = self.mean.n_params
        if nm:
            gm = self.mean.grad_params(self.X) @ g_f
            gm += eval_priors(self.mean.priors, self.mean.get_params())[1]
            grad[k:k + nm] = gm
            k += nm
        if self.kernel.n_params:
            pri = eval_priors(self.kernel.priors, self.kernel.get_params())[1]
            for j, dK in enumerate(self.kernel.iter_gram_grads(self.X)):
                if self._jitter_ratio:
                    dK = dK + (self._jitter_ratio * np.trace(dK) / n) * np.eye(n)
                dL = linalg.chol_directional_derivative(self.chol, dK)
                grad[k + j] = float(g_f @ (dL @ self.v)) + pri[j]
        return grad

    # -- HMC adapter -----------------------------------------------------------

    def _hmc_state(self):
        return self.get_params()

    def _hmc_set_state(self, x):
        self.set_params(x)

    def _hmc_target(self):
        return self.log_posterior()

    def _hmc_grad(self):
        return self.grad_log_posterior()

    def _hmc_names(self):
        return self.param_names()

    def describe(self):
        lines = [f"GP Monte Carlo object:",
                 f"Dim = {self.dim}",
                 f"Number of observations = {self.n_obs}",
                 "Mean function:",
                 f"  Type: {type(self.mean).__name__}, "
                 f"Params: {np.round(self.mean.get_params(), 6).tolist()}",
                 "Kernel:",
                 f"  Type: {type(self.kernel).__name__}, "
                 f"Params: {np.round(self.kernel.get_params(), 6).tolist()}",
                 "Likelihood:",
                 f"  Type: {type(self.likelihood).__name__}, "
                 f"Params: {np.round(self.likelihood.get_params(), 6).tolist()}",
                 f"Log-posterior = {self.log_posterior():.3f}"]
        return "\n".join(lines)

    def __repr__(self):
        return (f"GPMC(dim={self.dim}, n={self.n_obs}, "
                f"likelihood={self.likelihood!r})")


# ---------------------------------------------------------------------------
# Hamiltonian Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class HMCConfig:
    """Sampler settings: leapfrog step size, step-count bounds, chain length
    and post-processing.  L_min == L_max == 1 gives Langevin-style
    single-step proposals."""
    epsilon: float = 0.01
    L_min: int = 5
    L_max: int = 15
    n_iter: int = 1000
    burn: int = 0
    thin: int = 1
    seed: int = 0

    def validate(self):
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if not (1 <= self.L_min <= self.L_max):
            raise ConfigurationError("need 1 <= L_min <= L_max")
        if self.thin < 1:
            raise ConfigurationError("thin must be >= 1")
        if not (0 <= self.burn < self.n_iter):
            raise ConfigurationError("need 0 <= burn < n_iter")


def mcmc(gp, cfg=None, **kwargs):
    """Sample the model with HMC and return the kept states.

    For a GPMC the state is (v, theta); for a GPExact it is the
    hyperparameter vector (log_noise, mean, kernel) targeted at the
    log-marginal likelihood plus any attached priors.  The chain drops
    the first `burn` iterations and keeps every `thin`-th state, so the
    result has ceil((n_iter - burn) / thin) columns, one row per
    parameter.
    """
    if cfg is None:
        cfg = HMCConfig(**kwargs)
    elif kwargs:
        cfg = HMCConfig(**{**cfg.__dict__, **kwargs})
    cfg.validate()

    x = gp._hmc_state().astype(float)
    t0 = gp._hmc_target()
    if not np.isfinite(t0):
        raise InputError("log target is not finite at the initial state")
    target, grad = t0, gp._hmc_grad()

    rng = np.random.Generator(np.random.Philox(cfg.seed))
    dim = x.size
    chain = np.empty((cfg.n_iter, dim))

    for it in range(cfg.n_iter):
        n_steps = int(rng.integers(cfg.L_min, cfg.L_max + 1))
        p0 = rng.standard_normal(dim)
        h0 = -target + 0.5 * float(p0 @ p0)
        xn = x.copy()
        p = p0 + 0.5 * cfg.epsilon * grad
        t_new = g_new = None
        ok = True
        for step in range(n_steps):
            xn = xn + cfg.epsilon * p
            try:
                gp._hmc_set_state(xn)
                t_new = gp._hmc_target()
                g_new = gp._hmc_grad()
            except NumericalError:
                ok = False
                break
            if not (np.isfinite(t_new) and np.all(np.isfinite(g_new))):
                ok = False
                break
            p = p + (cfg.epsilon if step < n_steps - 1 else 0.5 * cfg.epsilon) * g_new
        if ok:
            h1 = -t_new + 0.5 * float(p @ p)
            ok = np.log(rng.uniform()) < h0 - h1
        if ok:
            x, target, grad = xn, t_new, g_new
        else:
            gp._hmc_set_state(x)
        chain[it] = x

    kept = chain[cfg.burn::cfg.thin]
    return kept.T.copy()


def mc_predict_y(gp, samples, Xstar, quad_order=20, include_var=False):
    """Per-sample predictive means of y at new inputs.

    For every kept sample, installs the state, conditions the noise-free
    latent GP on f = m + L v, and propagates the Gaussian latent belief
    through the likelihood with Gauss-Hermite quadrature.  Rows average
    to the Monte Carlo estimate of the predictive mean.

    Returns an array of shape (n_samples, m), or a (means, variances)
    pair when `include_var` is set.
    """
    Xs = as_input_matrix(Xstar)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n_kept = samples.shape[1]
    m = Xs.shape[1]
    means = np.empty((n_kept, m))
    variances = np.empty((n_kept, m))
    for i in range(n_kept):
        gp.set_params(samples[:, i])
        Kfs = gp.kernel.cross_gram(gp.X, Xs)
        W = linalg.solve_lower(gp.chol, Kfs)
        mu = gp.mean(Xs) + W.T @ gp.v
        var = np.maximum(gp.kernel.diag(Xs) - np.sum(W * W, axis=0), 0.0)
        means[i], variances[i] = gp.likelihood.predictive_moments(
            mu, var, quad_order=quad_order)
    if include_var:
        return means, variances
    return means
