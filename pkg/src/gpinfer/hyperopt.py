"""Hyperparameter estimation: priors, type-II maximum likelihood and MAP
optimization via L-BFGS-B."""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import ConfigurationError, InputError

_LOG2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# univariate priors
# ---------------------------------------------------------------------------

class Normal:
    """Normal prior N(mu, sigma^2) on a single (log-scale) parameter."""

    def __init__(self, mu=0.0, sigma=1.0):
        if sigma <= 0:
            raise ConfigurationError("Normal prior needs sigma > 0")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def logpdf(self, x):
        z = (x - self.mu) / self.sigma
        return -0.5 * _LOG2PI - np.log(self.sigma) - 0.5 * z * z

    def dlogpdf(self, x):
        return -(x - self.mu) / self.sigma ** 2

    def __repr__(self):
        return f"Normal({self.mu:.4g}, {self.sigma:.4g})"


class Uniform:
    """Uniform prior on [a, b]; -inf outside the support."""

    def __init__(self, a, b):
        if not b > a:
            raise ConfigurationError("Uniform prior needs b > a")
        self.a = float(a)
        self.b = float(b)

    def logpdf(self, x):
        if self.a <= x <= self.b:
            return -np.log(self.b - self.a)
        return -np.inf

    def dlogpdf(self, x):
        return 0.0

    def __repr__(self):
        return f"Uniform({self.a:.4g}, {self.b:.4g})"


class Flat:
    """Improper flat prior: contributes 0 to targets and gradients."""

    def logpdf(self, x):
        return 0.0

    def dlogpdf(self, x):
        return 0.0

    def __repr__(self):
        return "Flat()"


def set_priors(target, priors):
    """Attach one prior per exposed parameter of a kernel, mean function
    or likelihood; pass a GP to set the single observation-noise prior."""
    priors = list(priors)
    if hasattr(target, "log_noise") and hasattr(target, "kernel"):
        if len(priors) != 1:
            raise ConfigurationError("a GP takes exactly one prior, for the noise")
        target.noise_prior = priors[0]
        return
    if len(priors) != target.n_params:
        raise ConfigurationError(
            f"{type(target).__name__} has {target.n_params} parameters, got {len(priors)} priors")
    target.priors = priors


def eval_priors(priors, values):
    """Sum of log prior densities and its gradient over aligned parameters.

    `priors` may be None (all flat) or a list matching len(values).
    """
    values = np.asarray(values, dtype=float)
    if priors is None:
        return 0.0, np.zeros(values.size)
    if len(priors) != values.size:
        raise ConfigurationError(
            f"prior list length {len(priors)} does not match {values.size} parameters")
    logp = 0.0
    grad = np.zeros(values.size)
    for i, (p, x) in enumerate(zip(priors, values)):
        logp += p.logpdf(x)
        grad[i] = p.dlogpdf(x)
    return logp, grad


# ---------------------------------------------------------------------------
# quasi-Newton minimization
# ---------------------------------------------------------------------------

@dataclass
class OptimizeOptions:
    """Which parameter groups move, and the solver tolerances.

    `bounds` is an optional list of (lo, hi) pairs aligned with the GP's
    full flattened parameter vector; entries for frozen groups are ignored.
    """
    domean: bool = True
    kern: bool = True
    noise: bool = True
    lik: bool = True
    max_iterations: int = 200
    gtol: float = 1e-8
    bounds: list = None


@dataclass
class OptimResult:
    minimizer: np.ndarray
    minimum: float
    iterations: int
    converged: bool
    message: str = ""


_BIG = 1e25


def minimize(fun, x0, bounds=None, gtol=1e-8, max_iterations=200):
    """L-BFGS-B wrapper used by `optimize`; also the test hook for
    injecting surrogate objectives.

    `fun(x)` must return (value, gradient).  Terminates when the
    projected gradient drops below `gtol`.  A failed line search returns
    the best point seen with converged=False rather than raising.
    """
    x0 = np.asarray(x0, dtype=float)
    if bounds is not None:
        x0 = np.array([np.clip(v, lo if lo is not None else -np.inf,
                               hi if hi is not None else np.inf)
                       for v, (lo, hi) in zip(x0, bounds)])
    f0, _ = fun(x0)
    if not np.isfinite(f0):
        raise InputError("objective is not finite at the starting point")

    def safe(x):
        try:
            f, g = fun(x)
        except (FloatingPointError, np.linalg.LinAlgError):
            return _BIG, np.zeros_like(x)
        if not np.isfinite(f):
            return _BIG, np.zeros_like(x)
        return f, np.asarray(g, dtype=float)

    res = scipy.optimize.minimize(
        safe, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": max_iterations, "gtol": gtol, "ftol": 1e-16,
                 "maxcor": 10})
    return OptimResult(minimizer=np.asarray(res.x, dtype=float),
                       minimum=float(res.fun),
                       iterations=int(res.nit),
                       converged=bool(res.status == 0),
                       message=str(res.message))


def _free_mask(gp, opts):
    flags = {"noise": opts.noise, "mean": opts.domean,
             "kern": opts.kern, "lik": opts.lik}
    mask = []
    for name, size in gp.param_groups():
        mask.extend([flags[name]] * size)
    mask = np.array(mask, dtype=bool)
    if mask.size and not mask.any():
        raise ConfigurationError("at least one parameter group must be free")
    return mask


def _run(gp, opts, with_prior):
    from .errors import NumericalError

    opts = opts or OptimizeOptions()
    mask = _free_mask(gp, opts)
    full = gp.get_params()

    def fun(xfree):
        x = full.copy()
        x[mask] = xfree
        try:
            gp.set_params(x)
        except NumericalError:
            return _BIG, np.zeros_like(xfree)
        f = -gp.log_marginal()
        g = -gp.grad_log_marginal()
        if with_prior:
            lp, lg = gp.log_prior(), gp.grad_log_prior()
            f -= lp
            g -= lg
        return f, g[mask]

    bounds = None
    if opts.bounds is not None:
        if len(opts.bounds) != full.size:
            raise ConfigurationError(
                f"bounds list length {len(opts.bounds)} does not match {full.size} parameters")
        bounds = [b for b, m in zip(opts.bounds, mask) if m]
    res = minimize(fun, full[mask], bounds=bounds, gtol=opts.gtol,
                   max_iterations=opts.max_iterations)
    best = full.copy()
    best[mask] = res.minimizer
    gp.set_params(best)
    res.minimizer = best
    return res


def optimize(gp, opts=None, **kwargs):
    """Type-II maximum likelihood: minimize the negative log-marginal
    likelihood over the free parameter groups.  The GP is left at the
    minimizer.  Keyword arguments override OptimizeOptions fields."""
    if kwargs:
        opts = OptimizeOptions(**{**(opts.__dict__ if opts else {}), **kwargs})
    return _run(gp, opts, with_prior=False)


def map_optimize(gp, opts=None, **kwargs):
    """Maximum a posteriori: like `optimize` but the objective includes
    the attached log priors, and box bounds are honored."""
    if kwargs:
        opts = OptimizeOptions(**{**(opts.__dict__ if opts else {}), **kwargs})
    return _run(gp, opts, with_prior=True)
