"""Observation models p(y | f, theta) for the latent-GP framework.

Each likelihood provides the pointwise log-density, its derivative in the
latent value f, partials with respect to its own (log-scale) parameters,
and moments of y given a Gaussian belief over f (computed by
Gauss-Hermite quadrature unless a closed form exists).

All entry points are vectorized: y and f may be scalars or arrays of the
same shape.
"""

from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import expit, gammaln, log_expit, log_ndtr, ndtr

from .errors import ConfigurationError, InputError

DEFAULT_QUAD_ORDER = 20

_LOG2PI = np.log(2.0 * np.pi)


@lru_cache(maxsize=None)
def _gh_cached(order):
    # Golub-Welsch: eigen-decomposition of the Jacobi matrix for the
    # probabilists' Hermite polynomials.  Weights sum to 1 (the mass of
    # the standard normal weight function).
    if order == 1:
        return np.zeros(1), np.ones(1)
    off = np.sqrt(np.arange(1, order, dtype=float))
    nodes, vecs = eigh_tridiagonal(np.zeros(order), off)
    weights = vecs[0, :] ** 2
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def gauss_hermite(order):
    """Nodes and weights integrating f against the standard normal density.

    The rule is exact for polynomials of degree <= 2*order - 1.
    """
    if order < 1:
        raise ConfigurationError("quadrature order must be >= 1")
    return _gh_cached(int(order))


def _phi_over_ndtr(f):
    # N(f;0,1) / Phi(f), stable for large |f| via the log forms
    return np.exp(-0.5 * f * f - 0.5 * _LOG2PI - log_ndtr(f))


class Likelihood:
    """Base class; subclasses define the table row they implement."""

    priors = None

    @property
    def n_params(self):
        return 0

    def get_params(self):
        return np.empty(0)

    def set_params(self, v):
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.n_params:
            raise ConfigurationError(
                f"{type(self).__name__} expects {self.n_params} parameters, got {v.size}")
        self._set_params(v)

    def _set_params(self, v):
        pass

    def param_names(self):
        return []

    def check_response(self, y):
        """Raise InputError when y violates the response-type constraint."""

    def log_density(self, y, f):
        raise NotImplementedError

    def dlog_df(self, y, f):
        raise NotImplementedError

    def dlog_dtheta(self, y, f):
        """Partials w.r.t. own parameters, shape (n_params,) + shape(f)."""
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return np.empty((0,) + np.broadcast(y, f).shape)

    def conditional_moments(self, f):
        """(E[y|f], Var[y|f]) elementwise."""
        raise NotImplementedError

    def predictive_moments(self, mu_f, var_f, quad_order=DEFAULT_QUAD_ORDER):
        """Mean and variance of y under f ~ N(mu_f, var_f).

        Integrates the conditional moments against the Gaussian belief
        with a Gauss-Hermite rule; `mu_f` and `var_f` may be arrays.
        """
        mu_f = np.asarray(mu_f, dtype=float)
        var_f = np.asarray(var_f, dtype=float)
        if np.any(var_f < 0):
            raise InputError("latent variance must be non-negative")
        t, w = gauss_hermite(quad_order)
        fq = mu_f[..., None] + np.sqrt(var_f)[..., None] * t
        ey, vy = self.conditional_moments(fq)
        mean = ey @ w
        second = (vy + ey * ey) @ w
        var = np.maximum(second - mean * mean, 0.0)
        if mean.ndim == 0:
            return float(mean), float(var)
        return mean, var

    def __repr__(self):
        vals = ", ".join(f"{v:.4g}" for v in self.get_params())
        return f"{type(self).__name__}({vals})"


class Bernoulli(Likelihood):
    """Bernoulli with probit link: p(y=1 | f) = Phi(f), y in {0, 1}."""

    def check_response(self, y):
        y = np.asarray(y)
        if not np.all((y == 0) | (y == 1)):
            raise InputError("Bernoulli responses must be 0 or 1")

    def log_density(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return y * log_ndtr(f) + (1.0 - y) * log_ndtr(-f)

    def dlog_df(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return y * _phi_over_ndtr(f) - (1.0 - y) * _phi_over_ndtr(-f)

    def conditional_moments(self, f):
        p = ndtr(f)
        return p, p * (1.0 - p)


class Binomial(Likelihood):
    """Binomial over a fixed trial count with logit link, y in {0..n}."""

    def __init__(self, trials):
        self.trials = int(trials)
        if self.trials < 1:
            raise ConfigurationError("Binomial needs at least one trial")

    def check_response(self, y):
        y = np.asarray(y)
        if not np.all((y >= 0) & (y <= self.trials) & (y == np.floor(y))):
            raise InputError(f"Binomial responses must be integers in [0, {self.trials}]")

    def log_density(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        n = self.trials
        binom = gammaln(n + 1) - gammaln(y + 1) - gammaln(n - y + 1)
        return binom + y * log_expit(f) + (n - y) * log_expit(-f)

    def dlog_df(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return y - self.trials * expit(f)

    def conditional_moments(self, f):
        g = expit(f)
        return self.trials * g, self.trials * g * (1.0 - g)

    def __repr__(self):
        return f"Binomial(trials={self.trials})"


class Exponential(Likelihood):
    """Exponential with rate exp(-f), y > 0."""

    def check_response(self, y):
        if not np.all(np.asarray(y) > 0):
            raise InputError("Exponential responses must be positive")

    def log_density(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return -f - y * np.exp(-f)

    def dlog_df(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return -1.0 + y * np.exp(-f)

    def conditional_moments(self, f):
        m = np.exp(f)
        return m, m * m


class Gaussian(Likelihood):
    """Gaussian noise N(y; f, sigma^2).  Parameter: (log sigma).

    `trainable=False` freezes sigma structurally, removing it from the
    exposed parameter vector (and hence from sampling and optimization).
    """

    def __init__(self, log_sigma=0.0, trainable=True):
        self.log_sigma = float(log_sigma)
        self.trainable = bool(trainable)

    @property
    def n_params(self):
        return 1 if self.trainable else 0

    def get_params(self):
        return np.array([self.log_sigma]) if self.trainable else np.empty(0)

    def _set_params(self, v):
        if self.trainable:
            self.log_sigma = v[0]

    def param_names(self):
        return ["Gauss_log_sigma"] if self.trainable else []

    def log_density(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        s2 = np.exp(2.0 * self.log_sigma)
        return -0.5 * _LOG2PI - self.log_sigma - 0.5 * (y - f) ** 2 / s2

    def dlog_df(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return (y - f) * np.exp(-2.0 * self.log_sigma)

    def dlog_dtheta(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        if not self.trainable:
            return super().dlog_dtheta(y, f)
        z2 = (y - f) ** 2 * np.exp(-2.0 * self.log_sigma)
        return (z2 - 1.0)[None, ...]

    def conditional_moments(self, f):
        f = np.asarray(f, dtype=float)
        return f, np.full_like(f, np.exp(2.0 * self.log_sigma))

    def predictive_moments(self, mu_f, var_f, quad_order=DEFAULT_QUAD_ORDER):
        # conjugate: no quadrature needed
        mu_f = np.asarray(mu_f, dtype=float)
        var_f = np.asarray(var_f, dtype=float)
        mean, var = mu_f + 0.0, var_f + np.exp(2.0 * self.log_sigma)
        if mean.ndim == 0:
            return float(mean), float(var)
        return mean, var


class Poisson(Likelihood):
    """Poisson with log link: rate exp(f), y in {0, 1, 2, ...}."""

    def check_response(self, y):
        y = np.asarray(y)
        if not np.all((y >= 0) & (y == np.floor(y))):
            raise InputError("Poisson responses must be non-negative integers")

    def log_density(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return y * f - np.exp(f) - gammaln(y + 1)

    def dlog_df(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return y - np.exp(f)

    def conditional_moments(self, f):
        m = np.exp(f)
        return m, m.copy() if isinstance(m, np.ndarray) else m


class StudentT(Likelihood):
    """Location-scale Student-t with fixed degrees of freedom nu.

    Parameter: (log sigma).  nu is a construction-time constant.
    """

    def __init__(self, nu=3.0, log_sigma=0.0, trainable=True):
        self.nu = float(nu)
        if self.nu <= 0:
            raise ConfigurationError("StudentT needs nu > 0")
        self.log_sigma = float(log_sigma)
        self.trainable = bool(trainable)

    @property
    def n_params(self):
        return 1 if self.trainable else 0

    def get_params(self):
        return np.array([self.log_sigma]) if self.trainable else np.empty(0)

    def _set_params(self, v):
        if self.trainable:
            self.log_sigma = v[0]

    def param_names(self):
        return ["StuT_log_sigma"] if self.trainable else []

    def log_density(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        nu = self.nu
        z = (y - f) * np.exp(-self.log_sigma)
        norm = gammaln(0.5 * (nu + 1)) - gammaln(0.5 * nu) \
            - 0.5 * np.log(nu * np.pi) - self.log_sigma
        return norm - 0.5 * (nu + 1) * np.log1p(z * z / nu)

    def dlog_df(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        nu = self.nu
        z = (y - f) * np.exp(-self.log_sigma)
        return (nu + 1) * z / (np.exp(self.log_sigma) * (nu + z * z))

    def dlog_dtheta(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        if not self.trainable:
            return super().dlog_dtheta(y, f)
        nu = self.nu
        z2 = ((y - f) * np.exp(-self.log_sigma)) ** 2
        return (-1.0 + (nu + 1) * z2 / (nu + z2))[None, ...]

    def conditional_moments(self, f):
        f = np.asarray(f, dtype=float)
        mean = f + 0.0
        if self.nu > 2:
            v = np.exp(2.0 * self.log_sigma) * self.nu / (self.nu - 2.0)
        else:
            v = np.inf
        return mean, np.full_like(mean, v)

    def __repr__(self):
        return f"StudentT(nu={self.nu:.4g}, log_sigma={self.log_sigma:.4g})"


class Flat(Likelihood):
    """Improper constant likelihood contributing 0 to every target.

    Useful for sampler diagnostics: with this observation model the
    latent posterior reduces to its whitened N(0, I) prior.
    """

    def check_response(self, y):
        pass

    def log_density(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return np.zeros(np.broadcast(y, f).shape)

    def dlog_df(self, y, f):
        y, f = np.asarray(y, dtype=float), np.asarray(f, dtype=float)
        return np.zeros(np.broadcast(y, f).shape)

    def conditional_moments(self, f):
        raise NotImplementedError("Flat has no observation distribution")
