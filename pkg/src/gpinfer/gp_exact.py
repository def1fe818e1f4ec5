"""Exact Gaussian-process regression with Gaussian observation noise.

Fitting caches the lower Cholesky factor of K + sigma_n^2 I and the
weight vector alpha = (K + sigma_n^2 I)^{-1} (y - m(X)), so repeated
prediction is cheap.  `ElasticGP` adds preallocated storage and
incremental O(n^2) Cholesky extension for appending observations.

The flattened hyperparameter vector is always ordered
(log_noise, mean parameters, kernel parameters).
"""

import numpy as np

from . import linalg
from .errors import InputError, NumericalError
from .hyperopt import eval_priors
from .kernels import as_input_matrix
from .means import MeanZero


def _rng(seed):
    # counter-based 64-bit generator: reproducible and stream-safe
    return np.random.Generator(np.random.Philox(seed))


class GPExact:
    """Gaussian process regression with analytic inference.

    Parameters
    ----------
    X : array, shape (d, n) or (n,)
        Training inputs, one column per observation.
    y : array, shape (n,)
        Training responses.
    mean, kernel :
        Mean function and covariance function.
    log_noise : float
        Log standard deviation of the observation noise.
    """

    def __init__(self, X, y, mean, kernel, log_noise=-2.0):
        X = as_input_matrix(X)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != y.size:
            raise InputError(f"{X.shape[1]} inputs but {y.size} responses")
        if y.size < 1:
            raise InputError("need at least one observation")
        self._X = X.copy()
        self._y = y.copy()
        self.mean = mean if mean is not None else MeanZero()
        self.kernel = kernel
        self.log_noise = float(log_noise)
        self.noise_prior = None
        self._fit()

    # -- data views ------------------------------------------------------

    @property
    def X(self):
        return self._X

    @property
    def y(self):
        return self._y

    @property
    def n_obs(self):
        return self._y.size

    @property
    def dim(self):
        return self._X.shape[0]

    @property
    def noise_variance(self):
        return np.exp(2.0 * self.log_noise)

    # -- fitting -----------------------------------------------------------

    def _fit(self):
        if self.n_obs == 0:
            self.chol = None
            self.alpha = None
            self.jitter = 0.0
            self._mll = None
            return
        K = self.kernel.gram(self.X)
        C = K + self.noise_variance * np.eye(self.n_obs)
        L, jit = linalg.chol_with_jitter(C)
        self._store_chol(L)
        self.jitter = jit
        # jitter scales with mean(diag C); its parameter dependence must
        # show up in the marginal-likelihood gradient when it is nonzero
        scale = float(np.mean(np.diag(C)))
        self._jitter_ratio = jit / scale if scale > 0 else 0.0
        self._refresh_weights()

    def _store_chol(self, L):
        self.chol = L

    def _refresh_weights(self):
        yc = self.y - self.mean(self.X)
        self.alpha = linalg.chol_solve(self.chol, yc)
        self._mll = -0.5 * float(yc @ self.alpha) \
            - linalg.logdet_from_chol(self.chol) / 2.0 \
            - 0.5 * self.n_obs * np.log(2.0 * np.pi)

    # -- parameters ---------------------------------------------------------

    def param_groups(self):
        return [("noise", 1), ("mean", self.mean.n_params),
                ("kern", self.kernel.n_params)]

    @property
    def n_params(self):
        return 1 + self.mean.n_params + self.kernel.n_params

    def get_params(self):
        return np.concatenate([[self.log_noise], self.mean.get_params(),
                               self.kernel.get_params()])

    def set_params(self, v):
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.n_params:
            raise InputError(f"expected {self.n_params} parameters, got {v.size}")
        self.log_noise = v[0]
        nm = self.mean.n_params
        self.mean.set_params(v[1:1 + nm])
        self.kernel.set_params(v[1 + nm:])
        self._fit()

    def param_names(self):
        return ["noise_log_sigma"] + self.mean.param_names() + self.kernel.param_names()

    # -- training objective ---------------------------------------------------

    def log_marginal(self):
        """Cached log-marginal likelihood of the training data."""
        if self._mll is None:
            raise InputError("GP has no observation data")
        return self._mll

    def grad_log_marginal(self):
        """Gradient of the log-marginal likelihood in parameter order
        (log_noise, mean, kernel)."""
        n = self.n_obs
        Cinv = linalg.chol_solve(self.chol, np.eye(n))
        W = np.outer(self.alpha, self.alpha) - Cinv
        r = self._jitter_ratio
        grad = np.empty(self.n_params)
        grad[0] = (1.0 + r) * self.noise_variance * np.trace(W)
        nm = self.mean.n_params
        if nm:
            grad[1:1 + nm] = self.mean.grad_params(self.X) @ self.alpha
        trW = np.trace(W)
        for j, dK in enumerate(self.kernel.iter_gram_grads(self.X)):
            g = 0.5 * np.sum(W * dK)
            if r:
                g += 0.5 * r * (np.trace(dK) / n) * trW
            grad[1 + nm + j] = g
        return grad

    def log_prior(self):
        lp = self.noise_prior.logpdf(self.log_noise) if self.noise_prior else 0.0
        lp += eval_priors(self.mean.priors, self.mean.get_params())[0]
        lp += eval_priors(self.kernel.priors, self.kernel.get_params())[0]
        return lp

    def grad_log_prior(self):
        g = np.zeros(self.n_params)
        if self.noise_prior:
            g[0] = self.noise_prior.dlogpdf(self.log_noise)
        nm = self.mean.n_params
        g[1:1 + nm] = eval_priors(self.mean.priors, self.mean.get_params())[1]
        g[1 + nm:] = eval_priors(self.kernel.priors, self.kernel.get_params())[1]
        return g

    # -- prediction ----------------------------------------------------------

    def predict_f(self, Xstar, full_cov=False):
        """Posterior mean and (co)variance of the latent function.

        Returns (mean, variance-vector) or (mean, covariance-matrix) when
        `full_cov` is set.  Variances are clamped at zero.
        """
        Xs = as_input_matrix(Xstar)
        ms = self.mean(Xs)
        if self.n_obs == 0:
            if full_cov:
                return ms, self.kernel.gram(Xs)
            return ms, np.maximum(self.kernel.diag(Xs), 0.0)
        Kfs = self.kernel.cross_gram(self.X, Xs)
        mu = ms + Kfs.T @ self.alpha
        V = linalg.solve_lower(self.chol, Kfs)
        if full_cov:
            cov = self.kernel.gram(Xs) - V.T @ V
            return mu, cov
        var = np.maximum(self.kernel.diag(Xs) - np.sum(V * V, axis=0), 0.0)
        return mu, var

    def predict_y(self, Xstar, full_cov=False):
        """Like `predict_f` with observation noise added to the (co)variance."""
        mu, cov = self.predict_f(Xstar, full_cov=full_cov)
        if full_cov:
            return mu, cov + self.noise_variance * np.eye(cov.shape[0])
        return mu, cov + self.noise_variance

    def sample_posterior(self, Xstar, count=1, seed=0):
        """Draw joint samples of the latent function at Xstar; (count, m)."""
        mu, cov = self.predict_f(Xstar, full_cov=True)
        L, _ = linalg.chol_with_jitter(cov, always_jitter=True)
        z = _rng(seed).standard_normal((count, mu.size))
        return mu[None, :] + z @ L.T

    # -- HMC adapter (state = hyperparameters) ---------------------------------

    def _hmc_state(self):
        return self.get_params()

    def _hmc_set_state(self, x):
        self.set_params(x)

    def _hmc_target(self):
        return self.log_marginal() + self.log_prior()

    def _hmc_grad(self):
        return self.grad_log_marginal() + self.grad_log_prior()

    def _hmc_names(self):
        return self.param_names()

    # -- reporting ----------------------------------------------------------

    def describe(self):
        """Human-readable summary block for the fitted model."""
        lines = [f"GP Exact object:",
                 f"Dim = {self.dim}",
                 f"Number of observations = {self.n_obs}",
                 "Mean function:",
                 f"  Type: {type(self.mean).__name__}, "
                 f"Params: {np.round(self.mean.get_params(), 6).tolist()}",
                 "Kernel:",
                 f"  Type: {type(self.kernel).__name__}, "
                 f"Params: {np.round(self.kernel.get_params(), 6).tolist()}"]
        if self.n_obs == 0:
            lines.append("  No observation data")
        else:
            with np.printoptions(precision=5, threshold=8, edgeitems=3):
                lines.append(f"Input observations = \n{self._X}")
                lines.append(f"Output observations = {self._y}")
            lines.append(f"Variance of observation noise = {self.noise_variance}")
            lines.append(f"Marginal Log-Likelihood = {self.log_marginal():.3f}")
        return "\n".join(lines)

    def __repr__(self):
        return (f"GPExact(dim={self.dim}, n={self.n_obs}, "
                f"kernel={self.kernel!r}, log_noise={self.log_noise:.4g})")


def sample_prior(mean, kernel, Xstar, count=1, seed=0):
    """Draw samples of the latent prior m + L z at the columns of Xstar."""
    Xs = as_input_matrix(Xstar)
    m = mean(Xs)
    K = kernel.gram(Xs)
    L, _ = linalg.chol_with_jitter(K, always_jitter=True)
    z = _rng(seed).standard_normal((count, m.size))
    return m[None, :] + z @ L.T


class ElasticGP(GPExact):
    """Exact GP with preallocated growing storage and O(n^2) appends.

    Starts with no observations.  Each appended point extends the
    Cholesky factor by one row via a single triangular solve; storage
    grows by `stepsize` whenever `capacity` is exhausted, preserving the
    existing data.
    """

    def __init__(self, dim, mean, kernel, log_noise=-2.0, capacity=100,
                 stepsize=100):
        if capacity < 1 or stepsize < 1:
            raise InputError("capacity and stepsize must be positive")
        self._dim = int(dim)
        self._cap = int(capacity)
        self._step = int(stepsize)
        self._n = 0
        self._Xbuf = np.empty((self._dim, self._cap))
        self._ybuf = np.empty(self._cap)
        self._Lbuf = np.zeros((self._cap, self._cap))
        self.mean = mean if mean is not None else MeanZero()
        self.kernel = kernel
        self.log_noise = float(log_noise)
        self.noise_prior = None
        self.chol = None
        self.alpha = None
        self.jitter = 0.0
        self._jitter_ratio = 0.0
        self._mll = None

    @property
    def X(self):
        return self._Xbuf[:, :self._n]

    @property
    def y(self):
        return self._ybuf[:self._n]

    @property
    def n_obs(self):
        return self._n

    @property
    def dim(self):
        return self._dim

    @property
    def capacity(self):
        return self._cap

    def _store_chol(self, L):
        self._Lbuf[:self._n, :self._n] = L
        self.chol = self._Lbuf[:self._n, :self._n]

    def _grow(self):
        new_cap = self._cap + self._step
        Xb = np.empty((self._dim, new_cap))
        yb = np.empty(new_cap)
        Lb = np.zeros((new_cap, new_cap))
        Xb[:, :self._n] = self._Xbuf[:, :self._n]
        yb[:self._n] = self._ybuf[:self._n]
        Lb[:self._n, :self._n] = self._Lbuf[:self._n, :self._n]
        self._Xbuf, self._ybuf, self._Lbuf = Xb, yb, Lb
        self._cap = new_cap

    def append(self, x_new, y_new):
        """Add one observation (or a batch) and update the cached factors."""
        x_new = np.asarray(x_new, dtype=float)
        if x_new.ndim <= 1:
            xs = x_new.reshape(self._dim, 1) if x_new.size == self._dim else None
            if xs is None:
                raise InputError(
                    f"appended point has dimension {x_new.size}, expected {self._dim}")
            ys = [float(y_new)]
        else:
            xs = as_input_matrix(x_new)
            if xs.shape[0] != self._dim:
                raise InputError(
                    f"appended batch has dimension {xs.shape[0]}, expected {self._dim}")
            ys = np.asarray(y_new, dtype=float).ravel()
            if xs.shape[1] != len(ys):
                raise InputError(f"{xs.shape[1]} inputs but {len(ys)} responses")
        for i in range(xs.shape[1]):
            self._append_one(xs[:, i], ys[i])
        self._refresh_weights()
        return self

    def _append_one(self, x, yval):
        if self._n == self._cap:
            self._grow()
        n = self._n
        col = x.reshape(self._dim, 1)
        kss = float(self.kernel.diag(col)[0]) + self.noise_variance + self.jitter
        if n == 0:
            if kss <= 0:
                raise NumericalError("non-positive prior variance", jitter=self.jitter)
            self._Xbuf[:, 0] = x
            self._ybuf[0] = yval
            self._Lbuf[0, 0] = np.sqrt(kss)
            self._n = 1
            self.chol = self._Lbuf[:1, :1]
            return
        kvec = self.kernel.cross_gram(self.X, col)[:, 0]
        c = linalg.solve_lower(self.chol, kvec)
        self._Xbuf[:, n] = x
        self._ybuf[n] = yval
        self._n = n + 1
        if not linalg.chol_extend(self._Lbuf, n, c, kss - float(c @ c)):
            # pivot lost positivity: refit the whole factor under the
            # escalating-jitter policy
            self._fit()
            return
        self.chol = self._Lbuf[:self._n, :self._n]

    def describe(self):
        return super().describe().replace("GP Exact object:",
                                          "GP Exact object (elastic):")
