"""Shared dense linear-algebra helpers: jittered Cholesky factorization,
incremental Cholesky extension, and the directional derivative of a
Cholesky factor."""

import numpy as np
import scipy.linalg

from .errors import NumericalError

# Jitter escalation policy: start at START_SCALE * mean(diag), double until
# CAP_SCALE * mean(diag), then give up.
JITTER_START = 1e-10
JITTER_CAP = 1e-4


def chol_with_jitter(A, start_scale=JITTER_START, cap_scale=JITTER_CAP,
                     always_jitter=False):
    """Lower Cholesky factor of `A`, inflating the diagonal if needed.

    Tries a plain factorization first (unless `always_jitter`), then adds
    `start_scale * mean(diag(A))` to the diagonal and doubles it until
    either the factorization succeeds or the cap is exceeded.

    Returns
    -------
    (L, jitter) : lower-triangular factor and the diagonal inflation used.

    Raises
    ------
    NumericalError
        If the matrix is not factorizable even at the jitter cap.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    scale = np.mean(np.diag(A)) if n else 0.0
    if scale <= 0.0:
        scale = 1.0
    jitters = [0.0] if not always_jitter else []
    j = start_scale * scale
    while j <= cap_scale * scale * (1 + 1e-12):
        jitters.append(j)
        j *= 2.0
    last = 0.0
    for jit in jitters:
        try:
            M = A if jit == 0.0 else A + jit * np.eye(n)
            L = scipy.linalg.cholesky(M, lower=True, check_finite=False)
            return L, jit
        except scipy.linalg.LinAlgError:
            last = jit
    raise NumericalError(
        f"matrix is not positive definite even with jitter {last:.3g}",
        jitter=last)


def chol_extend(L, n, c, d2):
    """Extend an n x n lower Cholesky factor in-place by one row.

    `L` is a preallocated buffer holding the current factor in its leading
    n x n block; `c` solves L c = k_new and `d2` is the new diagonal pivot
    k(x,x) - c.c.  Returns False when the pivot is not positive, in which
    case the caller must refit.
    """
    if d2 <= 0.0:
        return False
    L[n, :n] = c
    L[n, n] = np.sqrt(d2)
    return True


def solve_lower(L, b):
    """Solve L x = b for lower-triangular L."""
    return scipy.linalg.solve_triangular(L, b, lower=True, check_finite=False)


def solve_upper_t(L, b):
    """Solve L^T x = b for lower-triangular L."""
    return scipy.linalg.solve_triangular(L, b, lower=True, trans='T',
                                         check_finite=False)


def chol_solve(L, b):
    """Solve (L L^T) x = b."""
    return solve_upper_t(L, solve_lower(L, b))


def logdet_from_chol(L):
    """log|A| for A = L L^T."""
    return 2.0 * np.sum(np.log(np.diag(L)))


def chol_directional_derivative(L, dK):
    """Directional derivative dL of a Cholesky factorization K = L L^T.

    Forward-mode rule: dL = L * phi(L^{-1} dK L^{-T}) where phi zeroes the
    strict upper triangle and halves the diagonal.  `dK` must be symmetric.
    """
    inner = solve_lower(L, solve_lower(L, dK.T).T)
    phi = np.tril(inner)
    np.fill_diagonal(phi, 0.5 * np.diag(inner))
    return L @ phi
