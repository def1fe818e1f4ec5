"""Compositional covariance functions.

Inputs are matrices of shape (d, n) with one observation per column.
Every trainable hyperparameter is stored on the log scale, and all
gradients are taken with respect to those log parameters, in the fixed
per-kernel ordering documented on each class.  Kernels compose with
``+`` and ``*``.
"""

import numpy as np

from .errors import ConfigurationError, InputError


def as_input_matrix(X):
    """Coerce an input array to (d, n) layout: one column per observation.

    1-D arrays are treated as n scalar observations (d = 1).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return X.reshape(1, -1)
    if X.ndim != 2:
        raise InputError(f"inputs must be a vector or a (d, n) matrix, got ndim={X.ndim}")
    return X


def _as_column(x, d=None):
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    if d is not None and x.shape[0] != d:
        raise InputError(f"input dimension mismatch: expected {d}, got {x.shape[0]}")
    return x


def sqdist(X1, X2):
    """Pairwise squared Euclidean distances between columns, clamped at 0.

    Uses max(|x|^2 + |x'|^2 - 2<x,x'>, 0) so cancellation can never
    produce a negative radicand.  When both arguments are the same array
    the diagonal is pinned to exactly zero, which keeps kernels that are
    non-smooth in the distance (Matern) free of cancellation noise.
    """
    aa = np.sum(X1 * X1, axis=0)
    bb = aa if X2 is X1 else np.sum(X2 * X2, axis=0)
    r2 = aa[:, None] + bb[None, :] - 2.0 * (X1.T @ X2)
    r2 = np.maximum(r2, 0.0)
    if X2 is X1:
        np.fill_diagonal(r2, 0.0)
    return r2


class Kernel:
    """Base class: parameter plumbing and composition.

    Subclasses implement `_cross(X1, X2)`, `_cross_grads(X1, X2)` (a
    generator of one matrix per log-parameter, in table order), `diag(X)`
    and `diag_grads(X)`.
    """

    #: priors attached via gpinfer.hyperopt.set_priors (None = all flat)
    priors = None

    def __add__(self, other):
        return Sum(self, other)

    def __mul__(self, other):
        return Product(self, other)

    # -- parameters ----------------------------------------------------

    @property
    def n_params(self):
        raise NotImplementedError

    def get_params(self):
        raise NotImplementedError

    def set_params(self, v):
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.n_params:
            raise ConfigurationError(
                f"{type(self).__name__} expects {self.n_params} parameters, got {v.size}")
        self._set_params(v)

    def _set_params(self, v):
        raise NotImplementedError

    def param_names(self):
        raise NotImplementedError

    # -- evaluation ----------------------------------------------------

    def eval(self, x, xp):
        """Evaluate k(x, x') for two single points."""
        x = _as_column(x)
        xp = _as_column(xp, d=x.shape[0])
        return float(self._cross(x, xp)[0, 0])

    def gram(self, X):
        """Symmetric Gram matrix over the columns of X."""
        X = as_input_matrix(X)
        K = self._cross(X, X)
        # mirror the upper triangle so symmetry holds exactly
        iu = np.triu_indices(K.shape[0], 1)
        K[iu[1], iu[0]] = K[iu]
        return K

    def cross_gram(self, X, X2):
        """Rectangular covariance matrix between the columns of X and X2."""
        X = as_input_matrix(X)
        X2 = as_input_matrix(X2)
        if X.shape[0] != X2.shape[0]:
            raise InputError(
                f"input dimension mismatch: {X.shape[0]} vs {X2.shape[0]}")
        return self._cross(X, X2)

    def diag(self, X):
        """Vector of k(x_i, x_i) without forming the full Gram matrix."""
        raise NotImplementedError

    # -- gradients (w.r.t. log parameters, table order) ------------------

    def grad(self, x, xp):
        """Gradient of k(x, x') with respect to the flattened log parameters."""
        x = _as_column(x)
        xp = _as_column(xp, d=x.shape[0])
        return np.array([float(g[0, 0]) for g in self._cross_grads(x, xp)])

    def iter_gram_grads(self, X):
        """Yield dK/dtheta_j over gram(X), one matrix at a time."""
        X = as_input_matrix(X)
        return self._cross_grads(X, X)

    def iter_cross_grads(self, X, X2):
        X = as_input_matrix(X)
        X2 = as_input_matrix(X2)
        return self._cross_grads(X, X2)

    def diag_grads(self, X):
        """(n_params, n) matrix of d k(x_i, x_i) / d theta_j."""
        raise NotImplementedError

    # -- subclass hooks --------------------------------------------------

    def _cross(self, X1, X2):
        raise NotImplementedError

    def _cross_grads(self, X1, X2):
        raise NotImplementedError

    def __repr__(self):
        vals = ", ".join(f"{v:.4g}" for v in self.get_params())
        return f"{type(self).__name__}({vals})"


def _check_ard(log_l, d, name):
    if log_l.size != d:
        raise ConfigurationError(
            f"{name}: ARD kernel has {log_l.size} length scales but inputs have dimension {d}")


# ---------------------------------------------------------------------------
# simple leaves
# ---------------------------------------------------------------------------

class Const(Kernel):
    """Constant covariance sigma^2.  Parameters: (log sigma)."""

    def __init__(self, log_sigma=0.0):
        self.log_sigma = float(log_sigma)

    n_params = 1

    def get_params(self):
        return np.array([self.log_sigma])

    def _set_params(self, v):
        self.log_sigma = v[0]

    def param_names(self):
        return ["Const_log_sigma"]

    def _cross(self, X1, X2):
        s2 = np.exp(2.0 * self.log_sigma)
        return np.full((X1.shape[1], X2.shape[1]), s2)

    def _cross_grads(self, X1, X2):
        yield 2.0 * self._cross(X1, X2)

    def diag(self, X):
        return np.full(X.shape[1], np.exp(2.0 * self.log_sigma))

    def diag_grads(self, X):
        return 2.0 * self.diag(X)[None, :]


class Noise(Kernel):
    """White noise sigma^2 * delta(x - x').

    The delta fires on exact (bitwise) coordinate equality only, so
    jittered near-duplicates do not trigger it.
    """

    def __init__(self, log_sigma=0.0):
        self.log_sigma = float(log_sigma)

    n_params = 1

    def get_params(self):
        return np.array([self.log_sigma])

    def _set_params(self, v):
        self.log_sigma = v[0]

    def param_names(self):
        return ["Noise_log_sigma"]

    @staticmethod
    def _equal_mask(X1, X2):
        return np.all(X1[:, :, None] == X2[:, None, :], axis=0)

    def _cross(self, X1, X2):
        s2 = np.exp(2.0 * self.log_sigma)
        return s2 * self._equal_mask(X1, X2)

    def _cross_grads(self, X1, X2):
        yield 2.0 * self._cross(X1, X2)

    def diag(self, X):
        return np.full(X.shape[1], np.exp(2.0 * self.log_sigma))

    def diag_grads(self, X):
        return 2.0 * self.diag(X)[None, :]


class LinIso(Kernel):
    """Linear (dot-product) kernel <x, x'> / l^2.  Parameters: (log l)."""

    def __init__(self, log_l=0.0):
        self.log_l = float(log_l)

    n_params = 1

    def get_params(self):
        return np.array([self.log_l])

    def _set_params(self, v):
        self.log_l = v[0]

    def param_names(self):
        return ["Lin_log_l"]

    def _cross(self, X1, X2):
        return (X1.T @ X2) / np.exp(2.0 * self.log_l)

    def _cross_grads(self, X1, X2):
        yield -2.0 * self._cross(X1, X2)

    def diag(self, X):
        return np.sum(X * X, axis=0) / np.exp(2.0 * self.log_l)

    def diag_grads(self, X):
        return -2.0 * self.diag(X)[None, :]


class LinArd(Kernel):
    """Linear ARD kernel x^T L^{-2} x'.  Parameters: (log l_1 .. log l_d).

    Carries no amplitude; compose with Const for a scaled version.
    """

    def __init__(self, log_l):
        self.log_l = np.atleast_1d(np.asarray(log_l, dtype=float)).copy()

    @property
    def n_params(self):
        return self.log_l.size

    def get_params(self):
        return self.log_l.copy()

    def _set_params(self, v):
        self.log_l = v.copy()

    def param_names(self):
        return [f"Lin_log_l{i + 1}" for i in range(self.log_l.size)]

    def _cross(self, X1, X2):
        _check_ard(self.log_l, X1.shape[0], "Lin")
        # scale both sides so evaluation is exactly symmetric in x, x'
        inv_l = np.exp(-self.log_l)[:, None]
        return (X1 * inv_l).T @ (X2 * inv_l)

    def _cross_grads(self, X1, X2):
        _check_ard(self.log_l, X1.shape[0], "Lin")
        inv_l2 = np.exp(-2.0 * self.log_l)
        for i in range(self.log_l.size):
            yield -2.0 * inv_l2[i] * np.outer(X1[i], X2[i])

    def diag(self, X):
        _check_ard(self.log_l, X.shape[0], "Lin")
        inv_l2 = np.exp(-2.0 * self.log_l)
        return np.sum(X * X * inv_l2[:, None], axis=0)

    def diag_grads(self, X):
        inv_l2 = np.exp(-2.0 * self.log_l)
        return -2.0 * (X * X) * inv_l2[:, None]


class Poly(Kernel):
    """Polynomial kernel sigma^2 (<x, x'> + c)^degree.

    Parameters: (log c, log sigma); the integer degree is structural and
    not trained.
    """

    def __init__(self, log_c=0.0, log_sigma=0.0, degree=2):
        self.log_c = float(log_c)
        self.log_sigma = float(log_sigma)
        self.degree = int(degree)
        if self.degree < 1:
            raise ConfigurationError("Poly degree must be a positive integer")

    n_params = 2

    def get_params(self):
        return np.array([self.log_c, self.log_sigma])

    def _set_params(self, v):
        self.log_c, self.log_sigma = v

    def param_names(self):
        return ["Poly_log_c", "Poly_log_sigma"]

    def _cross(self, X1, X2):
        s2 = np.exp(2.0 * self.log_sigma)
        base = X1.T @ X2 + np.exp(self.log_c)
        return s2 * base ** self.degree

    def _cross_grads(self, X1, X2):
        s2 = np.exp(2.0 * self.log_sigma)
        c = np.exp(self.log_c)
        base = X1.T @ X2 + c
        yield s2 * self.degree * base ** (self.degree - 1) * c
        yield 2.0 * s2 * base ** self.degree

    def diag(self, X):
        s2 = np.exp(2.0 * self.log_sigma)
        base = np.sum(X * X, axis=0) + np.exp(self.log_c)
        return s2 * base ** self.degree

    def diag_grads(self, X):
        s2 = np.exp(2.0 * self.log_sigma)
        c = np.exp(self.log_c)
        base = np.sum(X * X, axis=0) + c
        return np.vstack([s2 * self.degree * base ** (self.degree - 1) * c,
                          2.0 * s2 * base ** self.degree])


# ---------------------------------------------------------------------------
# stationary leaves
# ---------------------------------------------------------------------------

class _StationaryIso(Kernel):
    """Shared plumbing for isotropic kernels with params (log l, log sigma)."""

    _tag = "Stat"

    def __init__(self, log_l=0.0, log_sigma=0.0):
        self.log_l = float(log_l)
        self.log_sigma = float(log_sigma)

    n_params = 2

    def get_params(self):
        return np.array([self.log_l, self.log_sigma])

    def _set_params(self, v):
        self.log_l, self.log_sigma = v

    def param_names(self):
        return [f"{self._tag}_log_l", f"{self._tag}_log_sigma"]

    def diag(self, X):
        return np.full(X.shape[1], np.exp(2.0 * self.log_sigma))

    def diag_grads(self, X):
        g = np.zeros((2, X.shape[1]))
        g[1] = 2.0 * np.exp(2.0 * self.log_sigma)
        return g


class _StationaryArd(Kernel):
    """Shared plumbing for ARD kernels with params (log l_1..d, log sigma)."""

    _tag = "Stat"

    def __init__(self, log_l, log_sigma=0.0):
        self.log_l = np.atleast_1d(np.asarray(log_l, dtype=float)).copy()
        self.log_sigma = float(log_sigma)

    @property
    def n_params(self):
        return self.log_l.size + 1

    def get_params(self):
        return np.append(self.log_l, self.log_sigma)

    def _set_params(self, v):
        self.log_l = v[:-1].copy()
        self.log_sigma = v[-1]

    def param_names(self):
        return [f"{self._tag}_log_l{i + 1}" for i in range(self.log_l.size)] \
            + [f"{self._tag}_log_sigma"]

    def _scaled_sqdist(self, X1, X2):
        _check_ard(self.log_l, X1.shape[0], self._tag)
        inv_l = np.exp(-self.log_l)[:, None]
        A = X1 * inv_l
        B = A if X2 is X1 else X2 * inv_l
        return sqdist(A, B)

    def _dim_sq(self, X1, X2, i):
        # squared coordinate difference along one dimension, over l_i^2
        d = X1[i][:, None] - X2[i][None, :]
        return d * d * np.exp(-2.0 * self.log_l[i])

    def diag(self, X):
        return np.full(X.shape[1], np.exp(2.0 * self.log_sigma))

    def diag_grads(self, X):
        g = np.zeros((self.n_params, X.shape[1]))
        g[-1] = 2.0 * np.exp(2.0 * self.log_sigma)
        return g


class SEIso(_StationaryIso):
    """Squared exponential sigma^2 exp(-r^2 / (2 l^2))."""

    _tag = "SE"

    def _cross(self, X1, X2):
        r2 = sqdist(X1, X2)
        return np.exp(2.0 * self.log_sigma) * np.exp(-0.5 * r2 * np.exp(-2.0 * self.log_l))

    def _cross_grads(self, X1, X2):
        r2 = sqdist(X1, X2)
        K = np.exp(2.0 * self.log_sigma) * np.exp(-0.5 * r2 * np.exp(-2.0 * self.log_l))
        yield K * r2 * np.exp(-2.0 * self.log_l)
        yield 2.0 * K


class SEArd(_StationaryArd):
    """Squared exponential with one length scale per input dimension."""

    _tag = "SE"

    def _cross(self, X1, X2):
        u2 = self._scaled_sqdist(X1, X2)
        return np.exp(2.0 * self.log_sigma) * np.exp(-0.5 * u2)

    def _cross_grads(self, X1, X2):
        u2 = self._scaled_sqdist(X1, X2)
        K = np.exp(2.0 * self.log_sigma) * np.exp(-0.5 * u2)
        for i in range(self.log_l.size):
            yield K * self._dim_sq(X1, X2, i)
        yield 2.0 * K


class Matern12Iso(_StationaryIso):
    """Matern 1/2 (exponential) kernel sigma^2 exp(-r / l).

    The log-l gradient at r = 0 is taken as 0, the symmetric subgradient,
    so duplicated inputs never produce NaN.
    """

    _tag = "Mat12"

    def _cross(self, X1, X2):
        t = np.sqrt(sqdist(X1, X2)) * np.exp(-self.log_l)
        return np.exp(2.0 * self.log_sigma) * np.exp(-t)

    def _cross_grads(self, X1, X2):
        t = np.sqrt(sqdist(X1, X2)) * np.exp(-self.log_l)
        K = np.exp(2.0 * self.log_sigma) * np.exp(-t)
        yield K * t
        yield 2.0 * K


class Matern12Ard(_StationaryArd):
    """Matern 1/2 kernel with ARD length scales."""

    _tag = "Mat12"

    def _cross(self, X1, X2):
        t = np.sqrt(self._scaled_sqdist(X1, X2))
        return np.exp(2.0 * self.log_sigma) * np.exp(-t)

    def _cross_grads(self, X1, X2):
        t = np.sqrt(self._scaled_sqdist(X1, X2))
        K = np.exp(2.0 * self.log_sigma) * np.exp(-t)
        safe_t = np.where(t > 0.0, t, 1.0)
        for i in range(self.log_l.size):
            di2 = self._dim_sq(X1, X2, i)
            yield np.where(t > 0.0, K * di2 / safe_t, 0.0)
        yield 2.0 * K


class Matern32Iso(_StationaryIso):
    """Matern 3/2 kernel sigma^2 (1 + sqrt(3) r/l) exp(-sqrt(3) r/l)."""

    _tag = "Mat32"

    def _cross(self, X1, X2):
        t = np.sqrt(3.0 * sqdist(X1, X2)) * np.exp(-self.log_l)
        return np.exp(2.0 * self.log_sigma) * (1.0 + t) * np.exp(-t)

    def _cross_grads(self, X1, X2):
        t = np.sqrt(3.0 * sqdist(X1, X2)) * np.exp(-self.log_l)
        s2 = np.exp(2.0 * self.log_sigma)
        yield s2 * t * t * np.exp(-t)
        yield 2.0 * s2 * (1.0 + t) * np.exp(-t)


class Matern32Ard(_StationaryArd):
    """Matern 3/2 kernel with ARD length scales."""

    _tag = "Mat32"

    def _cross(self, X1, X2):
        t = np.sqrt(3.0 * self._scaled_sqdist(X1, X2))
        return np.exp(2.0 * self.log_sigma) * (1.0 + t) * np.exp(-t)

    def _cross_grads(self, X1, X2):
        t = np.sqrt(3.0 * self._scaled_sqdist(X1, X2))
        s2 = np.exp(2.0 * self.log_sigma)
        e = np.exp(-t)
        for i in range(self.log_l.size):
            yield 3.0 * s2 * e * self._dim_sq(X1, X2, i)
        yield 2.0 * s2 * (1.0 + t) * e


class Matern52Iso(_StationaryIso):
    """Matern 5/2 kernel sigma^2 (1 + t + t^2/3) exp(-t), t = sqrt(5) r/l."""

    _tag = "Mat52"

    def _cross(self, X1, X2):
        t = np.sqrt(5.0 * sqdist(X1, X2)) * np.exp(-self.log_l)
        return np.exp(2.0 * self.log_sigma) * (1.0 + t + t * t / 3.0) * np.exp(-t)

    def _cross_grads(self, X1, X2):
        t = np.sqrt(5.0 * sqdist(X1, X2)) * np.exp(-self.log_l)
        s2 = np.exp(2.0 * self.log_sigma)
        e = np.exp(-t)
        yield s2 * e * t * t * (1.0 + t) / 3.0
        yield 2.0 * s2 * (1.0 + t + t * t / 3.0) * e


class Matern52Ard(_StationaryArd):
    """Matern 5/2 kernel with ARD length scales."""

    _tag = "Mat52"

    def _cross(self, X1, X2):
        t = np.sqrt(5.0 * self._scaled_sqdist(X1, X2))
        return np.exp(2.0 * self.log_sigma) * (1.0 + t + t * t / 3.0) * np.exp(-t)

    def _cross_grads(self, X1, X2):
        t = np.sqrt(5.0 * self._scaled_sqdist(X1, X2))
        s2 = np.exp(2.0 * self.log_sigma)
        e = np.exp(-t)
        for i in range(self.log_l.size):
            yield (5.0 / 3.0) * s2 * e * (1.0 + t) * self._dim_sq(X1, X2, i)
        yield 2.0 * s2 * (1.0 + t + t * t / 3.0) * e


class Periodic(Kernel):
    """Periodic kernel sigma^2 exp(-2 sin^2(pi r / p) / l^2).

    Parameters: (log l, log sigma, log p) with r the Euclidean distance.
    """

    def __init__(self, log_l=0.0, log_sigma=0.0, log_p=0.0):
        self.log_l = float(log_l)
        self.log_sigma = float(log_sigma)
        self.log_p = float(log_p)

    n_params = 3

    def get_params(self):
        return np.array([self.log_l, self.log_sigma, self.log_p])

    def _set_params(self, v):
        self.log_l, self.log_sigma, self.log_p = v

    def param_names(self):
        return ["Per_log_l", "Per_log_sigma", "Per_log_p"]

    def _cross(self, X1, X2):
        u = np.pi * np.sqrt(sqdist(X1, X2)) * np.exp(-self.log_p)
        s = np.sin(u)
        return np.exp(2.0 * self.log_sigma) * np.exp(-2.0 * s * s * np.exp(-2.0 * self.log_l))

    def _cross_grads(self, X1, X2):
        inv_l2 = np.exp(-2.0 * self.log_l)
        u = np.pi * np.sqrt(sqdist(X1, X2)) * np.exp(-self.log_p)
        s = np.sin(u)
        K = np.exp(2.0 * self.log_sigma) * np.exp(-2.0 * s * s * inv_l2)
        yield K * 4.0 * s * s * inv_l2
        yield 2.0 * K
        yield K * 2.0 * inv_l2 * np.sin(2.0 * u) * u

    def diag(self, X):
        return np.full(X.shape[1], np.exp(2.0 * self.log_sigma))

    def diag_grads(self, X):
        g = np.zeros((3, X.shape[1]))
        g[1] = 2.0 * np.exp(2.0 * self.log_sigma)
        return g


class RQIso(Kernel):
    """Rational quadratic sigma^2 (1 + r^2 / (2 alpha l^2))^(-alpha).

    Parameters: (log l, log sigma, log alpha).
    """

    def __init__(self, log_l=0.0, log_sigma=0.0, log_alpha=0.0):
        self.log_l = float(log_l)
        self.log_sigma = float(log_sigma)
        self.log_alpha = float(log_alpha)

    n_params = 3

    def get_params(self):
        return np.array([self.log_l, self.log_sigma, self.log_alpha])

    def _set_params(self, v):
        self.log_l, self.log_sigma, self.log_alpha = v

    def param_names(self):
        return ["RQ_log_l", "RQ_log_sigma", "RQ_log_alpha"]

    def _z(self, X1, X2):
        a = np.exp(self.log_alpha)
        return sqdist(X1, X2) * np.exp(-2.0 * self.log_l) / (2.0 * a)

    def _cross(self, X1, X2):
        a = np.exp(self.log_alpha)
        return np.exp(2.0 * self.log_sigma) * (1.0 + self._z(X1, X2)) ** (-a)

    def _cross_grads(self, X1, X2):
        a = np.exp(self.log_alpha)
        z = self._z(X1, X2)
        b = 1.0 + z
        K = np.exp(2.0 * self.log_sigma) * b ** (-a)
        yield 2.0 * a * K * z / b
        yield 2.0 * K
        yield K * a * (z / b - np.log(b))

    def diag(self, X):
        return np.full(X.shape[1], np.exp(2.0 * self.log_sigma))

    def diag_grads(self, X):
        g = np.zeros((3, X.shape[1]))
        g[1] = 2.0 * np.exp(2.0 * self.log_sigma)
        return g


class RQArd(_StationaryArd):
    """Rational quadratic with ARD length scales.

    Parameters: (log l_1 .. log l_d, log sigma, log alpha).
    """

    _tag = "RQ"

    def __init__(self, log_l, log_sigma=0.0, log_alpha=0.0):
        super().__init__(log_l, log_sigma)
        self.log_alpha = float(log_alpha)

    @property
    def n_params(self):
        return self.log_l.size + 2

    def get_params(self):
        return np.concatenate([self.log_l, [self.log_sigma, self.log_alpha]])

    def _set_params(self, v):
        self.log_l = v[:-2].copy()
        self.log_sigma, self.log_alpha = v[-2:]

    def param_names(self):
        return [f"RQ_log_l{i + 1}" for i in range(self.log_l.size)] \
            + ["RQ_log_sigma", "RQ_log_alpha"]

    def _cross(self, X1, X2):
        a = np.exp(self.log_alpha)
        z = self._scaled_sqdist(X1, X2) / (2.0 * a)
        return np.exp(2.0 * self.log_sigma) * (1.0 + z) ** (-a)

    def _cross_grads(self, X1, X2):
        a = np.exp(self.log_alpha)
        z = self._scaled_sqdist(X1, X2) / (2.0 * a)
        b = 1.0 + z
        K = np.exp(2.0 * self.log_sigma) * b ** (-a)
        for i in range(self.log_l.size):
            yield K / b * self._dim_sq(X1, X2, i)
        yield 2.0 * K
        yield K * a * (z / b - np.log(b))

    def diag_grads(self, X):
        g = np.zeros((self.n_params, X.shape[1]))
        g[-2] = 2.0 * np.exp(2.0 * self.log_sigma)
        return g


# ---------------------------------------------------------------------------
# wrappers and composites
# ---------------------------------------------------------------------------

class Fixed(Kernel):
    """Wrapper exposing only a subset of the child's parameters.

    `free` lists the child parameter indices that remain trainable;
    everything else is held at its current value and dropped from
    get/set_params and all gradients.
    """

    def __init__(self, kernel, free=()):
        self.kernel = kernel
        self.free = sorted(int(i) for i in free)
        if any(i < 0 or i >= kernel.n_params for i in self.free):
            raise ConfigurationError("Fixed: free index out of range")

    @property
    def n_params(self):
        return len(self.free)

    def get_params(self):
        return self.kernel.get_params()[self.free]

    def _set_params(self, v):
        full = self.kernel.get_params()
        full[self.free] = v
        self.kernel.set_params(full)

    def param_names(self):
        names = self.kernel.param_names()
        return [names[i] for i in self.free]

    def _cross(self, X1, X2):
        return self.kernel._cross(X1, X2)

    def _cross_grads(self, X1, X2):
        for j, g in enumerate(self.kernel._cross_grads(X1, X2)):
            if j in self.free:
                yield g

    def diag(self, X):
        return self.kernel.diag(X)

    def diag_grads(self, X):
        return self.kernel.diag_grads(X)[self.free]

    def __repr__(self):
        return f"Fixed({self.kernel!r}, free={self.free})"


def fix(kernel, target=None):
    """Freeze kernel hyperparameters.

    `target` may be None (freeze everything), an iterable of 0-based
    parameter indices to freeze, or a name fragment such as "sigma", "l",
    "p", "alpha" or "c" matching against the kernel's parameter names.
    """
    n = kernel.n_params
    if target is None:
        fixed = set(range(n))
    elif isinstance(target, str):
        key = {"σ": "sigma", "ℓ": "l", "ell": "l", "α": "alpha"}.get(target, target)
        names = kernel.param_names()
        fixed = {i for i, name in enumerate(names)
                 if name.rsplit("log_", 1)[-1].rstrip("0123456789") == key}
        if not fixed:
            raise ConfigurationError(f"fix: no parameter named {target!r} in {names}")
    else:
        fixed = {int(i) for i in target}
    free = [i for i in range(n) if i not in fixed]
    return Fixed(kernel, free)


class Masked(Kernel):
    """Apply a kernel to a subset of input dimensions (0-based indices)."""

    def __init__(self, kernel, dims):
        self.kernel = kernel
        self.dims = [int(i) for i in dims]
        if len(set(self.dims)) != len(self.dims) or any(i < 0 for i in self.dims):
            raise ConfigurationError("Masked: dims must be distinct non-negative indices")

    def _slice(self, X):
        if max(self.dims) >= X.shape[0]:
            raise InputError(
                f"Masked: active dim {max(self.dims)} out of range for d={X.shape[0]}")
        return X[self.dims, :]

    @property
    def n_params(self):
        return self.kernel.n_params

    def get_params(self):
        return self.kernel.get_params()

    def _set_params(self, v):
        self.kernel.set_params(v)

    def param_names(self):
        return self.kernel.param_names()

    def _cross(self, X1, X2):
        return self.kernel._cross(self._slice(X1), self._slice(X2))

    def _cross_grads(self, X1, X2):
        return self.kernel._cross_grads(self._slice(X1), self._slice(X2))

    def diag(self, X):
        return self.kernel.diag(self._slice(X))

    def diag_grads(self, X):
        return self.kernel.diag_grads(self._slice(X))

    def __repr__(self):
        return f"Masked({self.kernel!r}, dims={self.dims})"


class _Composite(Kernel):
    def __init__(self, *parts):
        flat = []
        for p in parts:
            if isinstance(p, type(self)):
                flat.extend(p.parts)
            else:
                flat.append(p)
        self.parts = flat

    @property
    def n_params(self):
        return sum(p.n_params for p in self.parts)

    def get_params(self):
        return np.concatenate([p.get_params() for p in self.parts]) \
            if self.parts else np.empty(0)

    def _set_params(self, v):
        k = 0
        for p in self.parts:
            p.set_params(v[k:k + p.n_params])
            k += p.n_params

    def param_names(self):
        out = []
        for i, p in enumerate(self.parts):
            out.extend(f"{i + 1}:{name}" for name in p.param_names())
        return out


class Sum(_Composite):
    """Sum of kernels; parameters concatenate depth-first left-to-right."""

    def _cross(self, X1, X2):
        out = self.parts[0]._cross(X1, X2)
        for p in self.parts[1:]:
            out = out + p._cross(X1, X2)
        return out

    def _cross_grads(self, X1, X2):
        for p in self.parts:
            yield from p._cross_grads(X1, X2)

    def diag(self, X):
        return sum(p.diag(X) for p in self.parts)

    def diag_grads(self, X):
        return np.vstack([p.diag_grads(X) for p in self.parts])

    def __repr__(self):
        return " + ".join(repr(p) for p in self.parts)


class Product(_Composite):
    """Elementwise product of kernels; gradients follow the product rule."""

    def _cross(self, X1, X2):
        out = self.parts[0]._cross(X1, X2)
        for p in self.parts[1:]:
            out = out * p._cross(X1, X2)
        return out

    def _cross_grads(self, X1, X2):
        Ks = [p._cross(X1, X2) for p in self.parts]
        for i, p in enumerate(self.parts):
            rest = None
            for j, Kj in enumerate(Ks):
                if j != i:
                    rest = Kj if rest is None else rest * Kj
            for g in p._cross_grads(X1, X2):
                yield g if rest is None else g * rest

    def diag(self, X):
        out = self.parts[0].diag(X)
        for p in self.parts[1:]:
            out = out * p.diag(X)
        return out

    def diag_grads(self, X):
        ds = [p.diag(X) for p in self.parts]
        rows = []
        for i, p in enumerate(self.parts):
            rest = None
            for j, dj in enumerate(ds):
                if j != i:
                    rest = dj if rest is None else rest * dj
            g = p.diag_grads(X)
            rows.append(g if rest is None else g * rest[None, :])
        return np.vstack(rows)

    def __repr__(self):
        return " * ".join(f"({p!r})" if isinstance(p, Sum) else repr(p)
                          for p in self.parts)


# ---------------------------------------------------------------------------
# convenience constructors: scalar length scale -> Iso, vector -> ARD
# ---------------------------------------------------------------------------

def _is_vector(x):
    return np.ndim(x) >= 1


def SE(log_l, log_sigma=0.0):
    """Squared-exponential constructor; a vector of length scales selects ARD."""
    return SEArd(log_l, log_sigma) if _is_vector(log_l) else SEIso(log_l, log_sigma)


def Matern(order, log_l, log_sigma=0.0):
    """Matern constructor; `order` is one of 1/2, 3/2, 5/2."""
    table = {0.5: (Matern12Iso, Matern12Ard),
             1.5: (Matern32Iso, Matern32Ard),
             2.5: (Matern52Iso, Matern52Ard)}
    try:
        iso, ard = table[float(order)]
    except KeyError:
        raise ConfigurationError(
            f"Matern order must be 1/2, 3/2 or 5/2, got {order}") from None
    return ard(log_l, log_sigma) if _is_vector(log_l) else iso(log_l, log_sigma)


def Lin(log_l):
    """Linear-kernel constructor; a vector of length scales selects ARD."""
    return LinArd(log_l) if _is_vector(log_l) else LinIso(log_l)


def RQ(log_l, log_sigma=0.0, log_alpha=0.0):
    """Rational-quadratic constructor; a vector of length scales selects ARD."""
    if _is_vector(log_l):
        return RQArd(log_l, log_sigma, log_alpha)
    return RQIso(log_l, log_sigma, log_alpha)
