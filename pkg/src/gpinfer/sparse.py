"""Inducing-point sparse GP approximations: SoR, DTC, FITC and FSA.

All four schemes share the low-rank structure C = Q + Lambda with
Q = K_fu K_uu^{-1} K_uf and a scheme-specific Lambda:

  SoR / DTC : Lambda = sigma_n^2 I
  FITC      : Lambda = diag[K_ff - Q_ff] + sigma_n^2 I
  FSA       : Lambda = blockdiag[K_ff - Q_ff] + sigma_n^2 I

Training never forms an n x n matrix (FSA touches dense blocks only);
everything runs through Woodbury and matrix-determinant identities in
O(n m^2) plus, for FSA, the per-block cubes.  Prediction uses the exact
test conditional for DTC/FITC/FSA and the degenerate one for SoR.

Inducing inputs are fixed, never optimized.
"""

import numpy as np

from . import linalg
from .errors import ConfigurationError, InputError
from .hyperopt import eval_priors
from .kernels import as_input_matrix
from .means import MeanZero

SCHEMES = ("sor", "dtc", "fitc", "fsa")


def nearest_inducing_blocks(X, Xu):
    """Partition observations by their nearest inducing point.

    Returns one index array per inducing point (empty groups removed),
    with distance ties resolved toward the lower inducing index.
    """
    X = as_input_matrix(X)
    Xu = as_input_matrix(Xu)
    d2 = np.sum((X[:, :, None] - Xu[:, None, :]) ** 2, axis=0)
    nearest = np.argmin(d2, axis=1)
    groups = [np.flatnonzero(nearest == j) for j in range(Xu.shape[1])]
    return [g for g in groups if g.size]


class SparseGP:
    """Sparse GP regression around m inducing inputs.

    Parameters
    ----------
    scheme : str
        One of "sor", "dtc", "fitc", "fsa".
    X, y : training inputs (d, n) and responses (n,).
    Xu : inducing inputs, shape (d, m).
    block_indices : list of index arrays (FSA only)
        Disjoint exhaustive partition of range(n).
    """

    def __init__(self, scheme, X, Xu, y, mean, kernel, log_noise=-2.0,
                 block_indices=None):
        scheme = str(scheme).lower()
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown sparse scheme {scheme!r}; pick from {SCHEMES}")
        X = as_input_matrix(X)
        Xu = as_input_matrix(Xu)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != y.size:
            raise InputError(f"{X.shape[1]} inputs but {y.size} responses")
        if Xu.shape[0] != X.shape[0]:
            raise InputError(
                f"inducing inputs have dimension {Xu.shape[0]}, data has {X.shape[0]}")
        if Xu.shape[1] > X.shape[1]:
            raise InputError("cannot use more inducing points than observations")
        self.scheme = scheme
        self.X = X.copy()
        self.Xu = Xu.copy()
        self.y = y.copy()
        self.mean = mean if mean is not None else MeanZero()
        self.kernel = kernel
        self.log_noise = float(log_noise)
        self.noise_prior = None
        if scheme == "fsa":
            if block_indices is None:
                raise ConfigurationError("FSA needs block_indices")
            self.blocks = [np.asarray(b, dtype=int).ravel() for b in block_indices]
            if any(b.size == 0 for b in self.blocks):
                raise ConfigurationError("FSA blocks must be non-empty")
            cover = np.concatenate(self.blocks)
            if (cover.size != y.size or np.unique(cover).size != y.size
                    or cover.min() != 0 or cover.max() != y.size - 1):
                raise ConfigurationError(
                    "FSA blocks must partition the observation indices exactly")
        else:
            self.blocks = None
        self._fit()

    # -- basic views ---------------------------------------------------------

    @property
    def n_obs(self):
        return self.y.size

    @property
    def n_inducing(self):
        return self.Xu.shape[1]

    @property
    def dim(self):
        return self.X.shape[0]

    @property
    def noise_variance(self):
        return np.exp(2.0 * self.log_noise)

    # -- parameters (same global order as the exact GP) -----------------------

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

    # -- Lambda helpers (diagonal for SoR/DTC/FITC, block for FSA) -------------

    def _lam_solve(self, M):
        if self.scheme != "fsa":
            return M / self._lam[:, None] if M.ndim == 2 else M / self._lam
        out = np.empty_like(M, dtype=float)
        for idx, Lb in zip(self.blocks, self._lam_chols):
            out[idx] = linalg.chol_solve(Lb, M[idx])
        return out

    def _lam_diag_inv(self):
        if self.scheme != "fsa":
            return 1.0 / self._lam
        out = np.empty(self.n_obs)
        for idx, Lb in zip(self.blocks, self._lam_chols):
            Linv = linalg.solve_lower(Lb, np.eye(idx.size))
            out[idx] = np.sum(Linv * Linv, axis=0)
        return out

    def _lam_logdet(self):
        if self.scheme != "fsa":
            return float(np.sum(np.log(self._lam)))
        return float(sum(linalg.logdet_from_chol(Lb) for Lb in self._lam_chols))

    # -- fitting ----------------------------------------------------------------

    def _fit(self):
        n = self.n_obs
        s2 = self.noise_variance
        self._yc = self.y - self.mean(self.X)
        Kuu = self.kernel.gram(self.Xu)
        self.Luu, self.jitter_uu = linalg.chol_with_jitter(Kuu)
        scale = float(np.mean(np.diag(Kuu)))
        self._jitter_ratio = self.jitter_uu / scale if scale > 0 else 0.0
        self.Kfu = self.kernel.cross_gram(self.X, self.Xu)

        V = linalg.solve_lower(self.Luu, self.Kfu.T)
        qdiag = np.sum(V * V, axis=0)
        if self.scheme in ("sor", "dtc"):
            self._lam = np.full(n, s2)
            self._lam_chols = None
        elif self.scheme == "fitc":
            raw = self.kernel.diag(self.X) - qdiag
            self._fitc_active = raw > 0.0
            self._lam = np.where(self._fitc_active, raw, 0.0) + s2
            self._lam_chols = None
        else:
            self._lam = None
            self._lam_chols = []
            for idx in self.blocks:
                Kbb = self.kernel.gram(self.X[:, idx])
                Qbb = V[:, idx].T @ V[:, idx]
                Lam_b = Kbb - Qbb + s2 * np.eye(idx.size)
                Lb, _ = linalg.chol_with_jitter(Lam_b)
                self._lam_chols.append(Lb)

        # factor A = Kuu + Kuf Lam^-1 Kfu through the well-conditioned
        # m x m matrix M = I + V Lam^-1 V^T (eigenvalues >= 1), giving the
        # lower-triangular La = Luu Lm with La La^T = A without ever
        # forming the ill-conditioned A itself
        B = self._lam_solve(self.Kfu)
        M = np.eye(self.n_inducing) + V @ self._lam_solve(V.T)
        Lm, _ = linalg.chol_with_jitter(M)
        self.La = self.Luu @ Lm
        Bty = B.T @ self._yc
        self.beta = linalg.chol_solve(self.La, Bty)
        self.alpha = self._lam_solve(self._yc) - B @ self.beta

        quad = float(self._yc @ self.alpha)
        logdet = linalg.logdet_from_chol(Lm) + self._lam_logdet()
        self._mll = -0.5 * quad - 0.5 * logdet - 0.5 * n * np.log(2.0 * np.pi)

    def cached_bytes(self):
        """Total bytes held by the fitted factors (complexity accounting)."""
        arrays = [self._yc, self.Luu, self.Kfu, self.La, self.beta, self.alpha]
        if self._lam is not None:
            arrays.append(self._lam)
        if self._lam_chols is not None:
            arrays.extend(self._lam_chols)
        return int(sum(a.nbytes for a in arrays))

    # -- prediction ----------------------------------------------------------

    def predict_f(self, Xstar):
        """Latent predictive mean and variance at the columns of Xstar."""
        Xs = as_input_matrix(Xstar)
        Ksu = self.kernel.cross_gram(Xs, self.Xu)
        mu = self.mean(Xs) + Ksu @ self.beta
        wa = linalg.solve_lower(self.La, Ksu.T)
        var_low = np.sum(wa * wa, axis=0)
        if self.scheme == "sor":
            return mu, np.maximum(var_low, 0.0)
        wu = linalg.solve_lower(self.Luu, Ksu.T)
        var = self.kernel.diag(Xs) - np.sum(wu * wu, axis=0) + var_low
        return mu, np.maximum(var, 0.0)

    def predict_y(self, Xstar):
        """Predictive mean and variance of noisy observations."""
        mu, var = self.predict_f(Xstar)
        return mu, var + self.noise_variance

    # -- marginal likelihood -----------------------------------------------------

    def log_marginal(self):
        """Log density of y under the scheme's approximate prior plus noise."""
        return self._mll

    def grad_log_marginal(self):
        """Gradient in parameter order (log_noise, mean, kernel).

        Uses d mll / d theta = -1/2 tr((C^{-1} - alpha alpha^T) dC) with
        the low-rank-plus-(block)diagonal structure of C, in O(n m^2) per
        parameter.
        """
        s2 = self.noise_variance
        alpha = self.alpha
        B = self._lam_solve(self.Kfu)
        Ainv = linalg.chol_solve(self.La, np.eye(self.n_inducing))
        P = linalg.chol_solve(self.Luu, self.Kfu.T)            # Kuu^-1 Kuf
        BAinv = B @ Ainv
        diag_Cinv = self._lam_diag_inv() - np.sum(BAinv * B, axis=1)

        grad = np.empty(self.n_params)
        grad[0] = s2 * (float(alpha @ alpha) - float(np.sum(diag_Cinv)))
        nm = self.mean.n_params
        if nm:
            grad[1:1 + nm] = self.mean.grad_params(self.X) @ alpha

        nk = self.kernel.n_params
        if nk:
            # R = (C^-1 - alpha alpha^T) P^T, G = P R
            CinvPt = self._lam_solve(P.T) - B @ (Ainv @ (B.T @ P.T))
            Pa = P @ alpha
            R = CinvPt - np.outer(alpha, Pa)
            G = P @ R
            diag_W = diag_Cinv - alpha * alpha

            gen_fu = self.kernel.iter_cross_grads(self.X, self.Xu)
            gen_uu = self.kernel.iter_gram_grads(self.Xu)
            if self.scheme == "fitc":
                dKdiag = self.kernel.diag_grads(self.X)
            if self.scheme == "fsa":
                gen_blocks = [self.kernel.iter_gram_grads(self.X[:, idx])
                              for idx in self.blocks]
                Wbb = []
                for idx, Lb in zip(self.blocks, self._lam_chols):
                    LamInv_b = linalg.chol_solve(Lb, np.eye(idx.size))
                    Wbb.append(LamInv_b - BAinv[idx] @ B[idx].T
                               - np.outer(alpha[idx], alpha[idx]))

            for j in range(nk):
                D = next(gen_fu)
                E = next(gen_uu)
                tr = 2.0 * float(np.sum(R * D)) - float(np.sum(G * E))
                if self.scheme == "fitc":
                    dq = 2.0 * np.sum(D * P.T, axis=1) - np.sum(P * (E @ P), axis=0)
                    dlam = np.where(self._fitc_active, dKdiag[j] - dq, 0.0)
                    tr += float(diag_W @ dlam)
                elif self.scheme == "fsa":
                    for bi, (idx, gen_b) in enumerate(zip(self.blocks, gen_blocks)):
                        dKbb = next(gen_b)
                        M = D[idx] @ P[:, idx]
                        PEP = P[:, idx].T @ (E @ P[:, idx])
                        dLam_b = dKbb - (M + M.T - PEP)
                        tr += float(np.sum(Wbb[bi] * dLam_b))
                grad[1 + nm + j] = -0.5 * tr
        return grad

    def describe(self):
        scheme = self.scheme.upper()
        lines = [f"GP Sparse object ({scheme}):",
                 f"Dim = {self.dim}",
                 f"Number of observations = {self.n_obs}",
                 f"Number of inducing points = {self.n_inducing}",
                 "Mean function:",
                 f"  Type: {type(self.mean).__name__}, "
                 f"Params: {np.round(self.mean.get_params(), 6).tolist()}",
                 "Kernel:",
                 f"  Type: {type(self.kernel).__name__}, "
                 f"Params: {np.round(self.kernel.get_params(), 6).tolist()}",
                 f"Variance of observation noise = {self.noise_variance}",
                 f"Marginal Log-Likelihood = {self.log_marginal():.3f}"]
        if self.blocks is not None:
            lines.insert(4, f"Number of blocks = {len(self.blocks)}")
        return "\n".join(lines)

    def __repr__(self):
        return (f"SparseGP({self.scheme!r}, n={self.n_obs}, "
                f"m={self.n_inducing}, kernel={self.kernel!r})")


def SoR(X, Xu, y, mean, kernel, log_noise=-2.0):
    """Subset-of-regressors approximation."""
    return SparseGP("sor", X, Xu, y, mean, kernel, log_noise)


def DTC(X, Xu, y, mean, kernel, log_noise=-2.0):
    """Deterministic-training-conditional approximation."""
    return SparseGP("dtc", X, Xu, y, mean, kernel, log_noise)


def FITC(X, Xu, y, mean, kernel, log_noise=-2.0):
    """Fully-independent-training-conditional approximation."""
    return SparseGP("fitc", X, Xu, y, mean, kernel, log_noise)


def FSA(X, Xu, block_indices, y, mean, kernel, log_noise=-2.0):
    """Full-scale approximation with block-diagonal corrections."""
    return SparseGP("fsa", X, Xu, y, mean, kernel, log_noise,
                    block_indices=block_indices)
