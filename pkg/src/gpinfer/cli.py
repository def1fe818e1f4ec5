"""Command-line front end: fit | predict | mcmc | sparse | bench.

Options may come from a flat key=value config file (--config); explicit
command-line flags win over config values.  Every failure exits nonzero
with a one-line, machine-parsable category prefix on stderr:

    config-error: ...     exit 2   (bad flags, expressions, options)
    data-error: ...       exit 3   (missing/malformed data files)
    numerical-error: ...  exit 4   (factorization failures)
"""

import argparse
import sys
import time
import tracemalloc

import numpy as np

from . import dataio
from .errors import (ConfigurationError, DataError, GPError, InputError,
                     NumericalError)
from .exprparse import parse_kernel, parse_likelihood, parse_mean
from .gp_exact import GPExact
from .gp_mc import GPMC, HMCConfig, mcmc
from .hyperopt import optimize
from .kernels import as_input_matrix
from .sparse import SparseGP, nearest_inducing_blocks

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _add_common(p):
    p.add_argument("--config", help="flat key=value options file (flags win)")
    p.add_argument("--data", help="training CSV path")
    p.add_argument("--x-cols", help="comma-separated input columns (names or 0-based indices)")
    p.add_argument("--y-col", help="response column (name or 0-based index)")
    p.add_argument("--kernel", help="kernel expression, e.g. 'SE(0.0,0.0) + RQ(0.0,0.0,0.0)'")
    p.add_argument("--mean", help="mean expression (default MeanZero())")
    p.add_argument("--lik", help="likelihood expression for non-Gaussian data")
    p.add_argument("--log-noise", type=float, help="log observation-noise std (default -2)")
    p.add_argument("--optimize", action="store_true", default=None,
                   help="maximize the marginal likelihood before using the model")
    p.add_argument("--grid", help="prediction inputs: 'a:b:n' or a CSV path")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--out", help="output path (fit: path prefix)")
    p.add_argument("--latent", action="store_true", default=None,
                   help="predict the latent f instead of noisy y")


def build_parser():
    ap = _Parser(prog="gpinfer",
                 description="Gaussian-process regression, MCMC and sparse approximation")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, desc in (("fit", "fit an exact GP and write parameters + summary"),
                       ("predict", "fit then write ribbon-ready predictions")):
        p = sub.add_parser(name, help=desc)
        _add_common(p)

    p = sub.add_parser("mcmc", help="HMC sampling of hyperparameters (and latents)")
    _add_common(p)
    p.add_argument("--epsilon", type=float, help="leapfrog step size (default 0.01)")
    p.add_argument("--lmin", type=int, help="min leapfrog steps (default 5)")
    p.add_argument("--lmax", type=int, help="max leapfrog steps (default 15)")
    p.add_argument("--n-iter", type=int, help="chain length (default 1000)")
    p.add_argument("--burn", type=int, help="iterations to drop (default 0)")
    p.add_argument("--thin", type=int, help="keep every thin-th state (default 1)")

    p = sub.add_parser("sparse", help="inducing-point approximation and predictions")
    _add_common(p)
    p.add_argument("--scheme", choices=["sor", "dtc", "fitc", "fsa"],
                   help="sparse approximation scheme")
    p.add_argument("--inducing", help="CSV of inducing points (one per row)")
    p.add_argument("--blocks", help="FSA: CSV with one block label per training row "
                                    "(default: nearest-inducing-point partition)")

    p = sub.add_parser("bench", help="timing of marginal-likelihood gradients and sparse fits")
    _add_common(p)
    p.add_argument("--kernels", help="semicolon-separated kernel expressions to time")
    p.add_argument("--bench-n", type=int, help="gradient workload size (default 3000)")
    p.add_argument("--bench-d", type=int, help="covariate count (default 10)")
    p.add_argument("--bench-reps", type=int, help="repetitions, min reported (default 10)")
    p.add_argument("--sparse-n", type=int, help="sparse timing-suite size (default 5000)")
    return ap


def load_config(path):
    opts = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigurationError(
                        f"{path}:{lineno}: expected 'key = value', got {line!r}")
                key, value = line.split("=", 1)
                opts[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return opts


_BOOL_KEYS = {"optimize", "latent"}
_INT_KEYS = {"seed", "lmin", "lmax", "n_iter", "burn", "thin",
             "bench_n", "bench_d", "bench_reps", "sparse_n", "quad_order"}
_FLOAT_KEYS = {"log_noise", "epsilon"}


def merge_options(args):
    """Config-file values with command-line overrides on top."""
    opts = {}
    if getattr(args, "config", None):
        opts.update(load_config(args.config))
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None:
            opts[key] = value
    for key in list(opts):
        v = opts[key]
        if not isinstance(v, str):
            continue
        if key in _BOOL_KEYS:
            opts[key] = v.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            try:
                opts[key] = int(v)
            except ValueError:
                raise ConfigurationError(f"option {key} must be an integer, got {v!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                opts[key] = float(v)
            except ValueError:
                raise ConfigurationError(f"option {key} must be a number, got {v!r}") from None
    return opts


def _require(opts, key, what):
    if not opts.get(key):
        raise ConfigurationError(f"missing required option --{key.replace('_', '-')} ({what})")
    return opts[key]


def _build_model_parts(opts):
    # parse expressions before touching any data file
    kernel = parse_kernel(_require(opts, "kernel", "kernel expression"))
    mean = parse_mean(opts.get("mean") or "MeanZero()")
    lik = parse_likelihood(opts["lik"]) if opts.get("lik") else None
    return kernel, mean, lik


def _load_training(opts):
    path = _require(opts, "data", "training CSV")
    return dataio.load_csv(path, opts.get("x_cols"), opts.get("y_col"))


def _grid(opts, X):
    spec = opts.get("grid")
    if spec:
        parts = str(spec).split(":")
        if len(parts) == 3:
            try:
                lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise ConfigurationError(
                    f"bad grid spec {spec!r}; use a:b:n or a CSV path") from None
            if X.shape[0] != 1:
                raise ConfigurationError("a:b:n grids are for 1-D inputs; pass a CSV")
            return np.linspace(lo, hi, count).reshape(1, -1)
        return dataio.load_matrix(spec)
    if X.shape[0] != 1:
        raise ConfigurationError("multivariate inputs need an explicit --grid CSV")
    lo, hi = X[0].min(), X[0].max()
    return np.linspace(lo, hi, 200).reshape(1, -1)


def cmd_fit(opts):
    kernel, mean, lik = _build_model_parts(opts)
    if lik is not None:
        raise ConfigurationError("fit handles Gaussian noise only; use mcmc for --lik")
    X, y = _load_training(opts)
    gp = GPExact(X, y, mean, kernel, log_noise=opts.get("log_noise", -2.0))
    result = optimize(gp) if opts.get("optimize") else None
    prefix = opts.get("out") or "gpinfer_fit"
    pairs = list(zip(gp.param_names(), gp.get_params()))
    pairs.append(("mll", gp.log_marginal()))
    if result is not None:
        pairs.append(("optimizer_converged", result.converged))
        pairs.append(("optimizer_iterations", result.iterations))
    dataio.write_key_values(f"{prefix}.params.txt", pairs)
    with open(f"{prefix}.summary.txt", "w") as fh:
        fh.write(gp.describe() + "\n")
    print(gp.describe())
    print(f"wrote {prefix}.params.txt and {prefix}.summary.txt")
    return EXIT_OK


def cmd_predict(opts):
    kernel, mean, lik = _build_model_parts(opts)
    if lik is not None:
        raise ConfigurationError("predict handles Gaussian noise only; use mcmc for --lik")
    X, y = _load_training(opts)
    gp = GPExact(X, y, mean, kernel, log_noise=opts.get("log_noise", -2.0))
    if opts.get("optimize"):
        optimize(gp)
    Xs = _grid(opts, X)
    mu, var = (gp.predict_f if opts.get("latent") else gp.predict_y)(Xs)
    out = opts.get("out") or "predictions.csv"
    dataio.write_predictions(out, Xs, mu, var)
    print(f"wrote {out} ({Xs.shape[1]} rows)")
    return EXIT_OK


def cmd_mcmc(opts):
    kernel, mean, lik = _build_model_parts(opts)
    X, y = _load_training(opts)
    if lik is None:
        gp = GPExact(X, y, mean, kernel, log_noise=opts.get("log_noise", -2.0))
    else:
        gp = GPMC(X, y, mean, kernel, lik)
    if opts.get("optimize"):
        if lik is not None:
            raise ConfigurationError("--optimize applies to the exact GP only")
        optimize(gp)
    cfg = HMCConfig(epsilon=opts.get("epsilon", 0.01),
                    L_min=opts.get("lmin", 5), L_max=opts.get("lmax", 15),
                    n_iter=opts.get("n_iter", 1000), burn=opts.get("burn", 0),
                    thin=opts.get("thin", 1), seed=opts.get("seed", 0))
    samples = mcmc(gp, cfg)
    out = opts.get("out") or "samples.csv"
    names = gp._hmc_names()
    dataio.write_csv(out, list(samples), names)
    print(f"wrote {out} ({samples.shape[1]} kept samples, {samples.shape[0]} parameters)")
    return EXIT_OK


def _read_blocks(path, n, Xu_count):
    labels = dataio.load_matrix(path)
    if labels.shape != (1, n):
        raise DataError(f"block file must hold one label per training row ({n}), "
                        f"got shape {labels.shape}")
    order = []
    groups = {}
    for i, lab in enumerate(labels[0]):
        groups.setdefault(lab, []).append(i)
        if lab not in order:
            order.append(lab)
    return [np.array(groups[lab], dtype=int) for lab in order]


def cmd_sparse(opts):
    kernel, mean, lik = _build_model_parts(opts)
    if lik is not None:
        raise ConfigurationError("sparse schemes assume Gaussian noise")
    scheme = _require(opts, "scheme", "sor|dtc|fitc|fsa")
    X, y = _load_training(opts)
    Xu = dataio.load_matrix(_require(opts, "inducing", "inducing-point CSV"))
    blocks = None
    if scheme == "fsa":
        if opts.get("blocks"):
            blocks = _read_blocks(opts["blocks"], y.size, Xu.shape[1])
        else:
            blocks = nearest_inducing_blocks(X, Xu)
    sgp = SparseGP(scheme, X, Xu, y, mean, kernel,
                   log_noise=opts.get("log_noise", -2.0), block_indices=blocks)
    if opts.get("optimize"):
        optimize(sgp)
    Xs = _grid(opts, X)
    mu, var = (sgp.predict_f if opts.get("latent") else sgp.predict_y)(Xs)
    out = opts.get("out") or "sparse_predictions.csv"
    dataio.write_predictions(out, Xs, mu, var)
    print(sgp.describe())
    print(f"wrote {out} ({Xs.shape[1]} rows)")
    return EXIT_OK


def _time_reps(fn, reps):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    tracemalloc.start()
    fn()
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return best * 1e3, peak


def cmd_bench(opts):
    seed = opts.get("seed", 0)
    reps = opts.get("bench_reps", 10)
    n = opts.get("bench_n", 3000)
    d = opts.get("bench_d", 10)
    exprs = [e.strip() for e in str(opts.get("kernels") or "SE(0.0,0.0)").split(";")
             if e.strip()]
    parsed = [(e, parse_kernel(e)) for e in exprs]

    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.standard_normal((d, n))
    y = rng.standard_normal(n)

    rows = []
    for text, kernel in parsed:
        gp = GPExact(X, y, None, kernel, log_noise=0.0)
        theta = gp.get_params()

        def work():
            gp.set_params(theta)
            gp.grad_log_marginal()

        ms, peak = _time_reps(work, reps)
        rows.append((text, ms, peak))
        print(f"{text}: {ms:.1f} ms (min of {reps}), peak alloc {peak} bytes")

    # sparse fit timing suite: |x-5|cos(2x) with quantile inducing points
    ns = opts.get("sparse_n", 5000)
    rng = np.random.Generator(np.random.Philox(seed))
    x = rng.beta(7.0, 7.0, size=ns) * 10.0
    ys = np.abs(x - 5.0) * np.cos(2.0 * x) + rng.normal(0.0, 10.0, size=ns)
    Xs = x.reshape(1, -1)
    Xu = np.quantile(x, [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5,
                         0.55, 0.6, 0.65, 0.7, 0.98]).reshape(1, -1)
    kern_expr = "SE(0.0,0.0)"
    log_noise = float(np.log(10.0))

    def fit_exact():
        GPExact(Xs, ys, None, parse_kernel(kern_expr), log_noise=log_noise)

    def fit_scheme(scheme):
        blocks = nearest_inducing_blocks(Xs, Xu) if scheme == "fsa" else None
        SparseGP(scheme, Xs, Xu, ys, None, parse_kernel(kern_expr),
                 log_noise=log_noise, block_indices=blocks)

    for label, fn in [("exact", fit_exact)] + \
            [(s, lambda s=s: fit_scheme(s)) for s in ("sor", "dtc", "fitc", "fsa")]:
        ms, peak = _time_reps(fn, max(1, reps // 3))
        rows.append((f"sparse-fit:{label}", ms, peak))
        print(f"sparse-fit:{label}: {ms:.1f} ms, peak alloc {peak} bytes")

    out = opts.get("out") or "bench.csv"
    with open(out, "w") as fh:
        fh.write("kernel,min_ms,allocs\n")
        for text, ms, peak in rows:
            fh.write(f"\"{text}\",{dataio.format_float(ms)},{peak}\n")
    print(f"wrote {out}")
    return EXIT_OK


_COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "mcmc": cmd_mcmc,
             "sparse": cmd_sparse, "bench": cmd_bench}


def run(argv=None):
    """Parse arguments, dispatch, and map errors to exit codes."""
    try:
        args = build_parser().parse_args(argv)
        opts = merge_options(args)
        return _COMMANDS[args.command](opts)
    except ConfigurationError as exc:
        print(f"config-error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, InputError) as exc:
        print(f"data-error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        jit = f" (attempted jitter {exc.jitter:.3g})" if exc.jitter is not None else ""
        print(f"numerical-error: {exc}{jit}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GPError as exc:
        print(f"config-error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
