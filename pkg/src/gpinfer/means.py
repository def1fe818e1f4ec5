"""Mean functions with parameter gradients.

Unlike kernels, mean parameters live on the natural scale since they
range over all of R.  Inputs follow the same (d, n) column layout.
"""

import numpy as np

from .errors import ConfigurationError, InputError
from .kernels import as_input_matrix


class MeanFunction:
    priors = None

    def __add__(self, other):
        return MeanSum(self, other)

    def __mul__(self, other):
        return MeanProduct(self, other)

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

    def __call__(self, X):
        """Evaluate the mean at each column of X, returning a length-n vector."""
        return self._eval(as_input_matrix(X))

    def grad_params(self, X):
        """(n_params, n) matrix of per-point partials w.r.t. each parameter."""
        return self._grad(as_input_matrix(X))

    def _eval(self, X):
        raise NotImplementedError

    def _grad(self, X):
        raise NotImplementedError


class MeanZero(MeanFunction):
    """Identically zero mean."""

    n_params = 0

    def get_params(self):
        return np.empty(0)

    def _set_params(self, v):
        pass

    def param_names(self):
        return []

    def _eval(self, X):
        return np.zeros(X.shape[1])

    def _grad(self, X):
        return np.empty((0, X.shape[1]))

    def __repr__(self):
        return "MeanZero()"


class MeanConst(MeanFunction):
    """Constant mean with a single scalar value."""

    n_params = 1

    def __init__(self, value=0.0):
        self.value = float(value)

    def get_params(self):
        return np.array([self.value])

    def _set_params(self, v):
        self.value = v[0]

    def param_names(self):
        return ["Const_value"]

    def _eval(self, X):
        return np.full(X.shape[1], self.value)

    def _grad(self, X):
        return np.ones((1, X.shape[1]))

    def __repr__(self):
        return f"MeanConst({self.value:.4g})"


class MeanLin(MeanFunction):
    """Linear mean x^T theta."""

    def __init__(self, coefs):
        self.coefs = np.atleast_1d(np.asarray(coefs, dtype=float)).copy()

    @property
    def n_params(self):
        return self.coefs.size

    def get_params(self):
        return self.coefs.copy()

    def _set_params(self, v):
        self.coefs = v.copy()

    def param_names(self):
        return [f"Lin_theta{i + 1}" for i in range(self.coefs.size)]

    def _check(self, X):
        if X.shape[0] != self.coefs.size:
            raise InputError(
                f"MeanLin has {self.coefs.size} coefficients but inputs have dimension {X.shape[0]}")

    def _eval(self, X):
        self._check(X)
        return X.T @ self.coefs

    def _grad(self, X):
        self._check(X)
        return X.copy()

    def __repr__(self):
        return f"MeanLin({list(self.coefs)})"


class MeanPoly(MeanFunction):
    """Polynomial mean sum_j x^j . theta_j with elementwise powers.

    `coefs` has shape (d, D): column j holds the coefficients of the
    (j+1)-th power, so degree 1 coincides with MeanLin.
    """

    def __init__(self, coefs):
        self.coefs = np.atleast_2d(np.asarray(coefs, dtype=float)).copy()

    @property
    def degree(self):
        return self.coefs.shape[1]

    @property
    def n_params(self):
        return self.coefs.size

    def get_params(self):
        # depth-first flattening: all powers for dim 1, then dim 2, ...
        return self.coefs.ravel().copy()

    def _set_params(self, v):
        self.coefs = v.reshape(self.coefs.shape).copy()

    def param_names(self):
        d, D = self.coefs.shape
        return [f"Poly_theta{i + 1}{j + 1}" for i in range(d) for j in range(D)]

    def _check(self, X):
        if X.shape[0] != self.coefs.shape[0]:
            raise InputError(
                f"MeanPoly is for dimension {self.coefs.shape[0]} but inputs have dimension {X.shape[0]}")

    def _eval(self, X):
        self._check(X)
        out = np.zeros(X.shape[1])
        P = X.copy()
        for j in range(self.degree):
            out += self.coefs[:, j] @ P
            P = P * X
        return out

    def _grad(self, X):
        self._check(X)
        d, D = self.coefs.shape
        g = np.empty((d * D, X.shape[1]))
        P = X.copy()
        for j in range(D):
            g[j::D] = P
            P = P * X
        return g

    def __repr__(self):
        return f"MeanPoly(degree={self.degree}, dim={self.coefs.shape[0]})"


class _MeanComposite(MeanFunction):
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
        if not self.parts:
            return np.empty(0)
        return np.concatenate([p.get_params() for p in self.parts])

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


class MeanSum(_MeanComposite):
    def _eval(self, X):
        return sum(p._eval(X) for p in self.parts)

    def _grad(self, X):
        return np.vstack([p._grad(X) for p in self.parts])

    def __repr__(self):
        return " + ".join(repr(p) for p in self.parts)


class MeanProduct(_MeanComposite):
    def _eval(self, X):
        out = self.parts[0]._eval(X)
        for p in self.parts[1:]:
            out = out * p._eval(X)
        return out

    def _grad(self, X):
        vals = [p._eval(X) for p in self.parts]
        rows = []
        for i, p in enumerate(self.parts):
            rest = None
            for j, vj in enumerate(vals):
                if j != i:
                    rest = vj if rest is None else rest * vj
            g = p._grad(X)
            rows.append(g if rest is None else g * rest[None, :])
        return np.vstack(rows)

    def __repr__(self):
        return " * ".join(repr(p) for p in self.parts)
