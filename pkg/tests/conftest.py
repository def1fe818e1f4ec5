"""Shared fixtures: finite-difference oracles and a kernel/mean node zoo."""

import numpy as np
import pytest

import gpinfer as gpi


def central_fd(fun, x0, step=1e-5):
    """Central finite differences of a scalar function of a vector."""
    x0 = np.asarray(x0, dtype=float)
    g = np.empty(x0.size)
    for j in range(x0.size):
        hi = x0.copy()
        hi[j] += step
        lo = x0.copy()
        lo[j] -= step
        g[j] = (fun(hi) - fun(lo)) / (2.0 * step)
    return g


def fd_wrt_params(obj, fun, step=1e-5):
    """Finite differences of `fun()` with respect to obj's parameter vector."""
    p0 = obj.get_params()

    def at(p):
        obj.set_params(p)
        try:
            return fun()
        finally:
            obj.set_params(p0)

    return central_fd(at, p0, step=step)


def kernel_zoo(d, rng):
    """One instance of every kernel node type for inputs of dimension d."""
    r = lambda k=1: rng.uniform(-1.0, 1.0, size=k) if k > 1 else float(rng.uniform(-1.0, 1.0))
    zoo = [
        gpi.Const(r()),
        gpi.LinIso(r()),
        gpi.LinArd(r(d) if d > 1 else [r()]),
        gpi.Matern12Iso(r(), r()),
        gpi.Matern32Iso(r(), r()),
        gpi.Matern52Iso(r(), r()),
        gpi.Matern12Ard(r(d) if d > 1 else [r()], r()),
        gpi.Matern32Ard(r(d) if d > 1 else [r()], r()),
        gpi.Matern52Ard(r(d) if d > 1 else [r()], r()),
        gpi.SEIso(r(), r()),
        gpi.SEArd(r(d) if d > 1 else [r()], r()),
        gpi.Periodic(r(), r(), r()),
        gpi.Poly(r(), r(), degree=2),
        gpi.Noise(r()),
        gpi.RQIso(r(), r(), r()),
        gpi.RQArd(r(d) if d > 1 else [r()], r(), r()),
        gpi.fix(gpi.SEIso(r(), r()), "sigma"),
        gpi.Masked(gpi.SEIso(r(), r()), list(range(d))),
        gpi.SEIso(r(), r()) + gpi.RQIso(r(), r(), r()),
        gpi.SEIso(r(), r()) * gpi.LinIso(r()),
        (gpi.SEIso(r(), r()) + gpi.Periodic(r(), r(), r())) * gpi.Matern32Iso(r(), r()),
    ]
    return zoo


def mean_zoo(d, rng):
    zoo = [
        gpi.MeanZero(),
        gpi.MeanConst(rng.normal()),
        gpi.MeanLin(rng.normal(size=d)),
        gpi.MeanPoly(rng.normal(size=(d, 2))),
        gpi.MeanConst(rng.normal()) + gpi.MeanLin(rng.normal(size=d)),
        gpi.MeanConst(rng.normal()) * gpi.MeanLin(rng.normal(size=d)),
    ]
    return zoo


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
