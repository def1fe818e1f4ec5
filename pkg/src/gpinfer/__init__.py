"""gpinfer: Gaussian-process inference toolkit.

Exact GP regression with cached Cholesky factors and elastic appends,
whitened Hamiltonian Monte Carlo for non-Gaussian observation models,
four inducing-point sparse approximations, composable kernel/mean
algebras, and L-BFGS hyperparameter estimation.  A small CLI
(`gpinfer fit|predict|mcmc|sparse|bench`) wraps the library around CSV
data and a textual kernel-expression grammar.
"""

from .errors import (ConfigurationError, DataError, GPError, InputError,
                     NumericalError)
from .kernels import (RQ, SE, Const, Fixed, Lin, LinArd, LinIso, Masked,
                      Matern, Matern12Ard, Matern12Iso, Matern32Ard,
                      Matern32Iso, Matern52Ard, Matern52Iso, Noise, Periodic,
                      Poly, Product, RQArd, RQIso, SEArd, SEIso, Sum, fix)
from .means import (MeanConst, MeanLin, MeanPoly, MeanProduct, MeanSum,
                    MeanZero)
from .likelihoods import (Bernoulli, Binomial, Exponential, Gaussian, Poisson,
                          StudentT, gauss_hermite)
from .gp_exact import ElasticGP, GPExact, sample_prior
from .gp_mc import GPMC, HMCConfig, mc_predict_y, mcmc
from .sparse import DTC, FITC, FSA, SoR, SparseGP, nearest_inducing_blocks
from .hyperopt import (Flat, Normal, OptimizeOptions, OptimResult, Uniform,
                       map_optimize, minimize, optimize, set_priors)

__version__ = "0.1.0"

__all__ = [
    "GPError", "InputError", "ConfigurationError", "DataError", "NumericalError",
    "Const", "LinIso", "LinArd", "Matern12Iso", "Matern12Ard", "Matern32Iso",
    "Matern32Ard", "Matern52Iso", "Matern52Ard", "SEIso", "SEArd", "Periodic",
    "Poly", "Noise", "RQIso", "RQArd", "Fixed", "Masked", "Sum", "Product",
    "SE", "Matern", "Lin", "RQ", "fix",
    "MeanZero", "MeanConst", "MeanLin", "MeanPoly", "MeanSum", "MeanProduct",
    "Bernoulli", "Binomial", "Exponential", "Gaussian", "Poisson", "StudentT",
    "gauss_hermite",
    "GPExact", "ElasticGP", "sample_prior",
    "GPMC", "HMCConfig", "mcmc", "mc_predict_y",
    "SparseGP", "SoR", "DTC", "FITC", "FSA", "nearest_inducing_blocks",
    "Normal", "Uniform", "Flat", "set_priors", "OptimizeOptions", "OptimResult",
    "minimize", "optimize", "map_optimize",
]
