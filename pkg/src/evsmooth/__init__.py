"""Additive smooth modelling of extreme values.

Fit extreme-value distributions whose parameters are penalized spline
functions of covariates, with smoothness chosen by Laplace-approximate
restricted maximum likelihood, then derive quantiles and return levels
with uncertainty.
"""

from .decluster import (ExtremalIndexEstimate, block_maxima,
                        extremal_index, r_largest, threshold_excesses)
from .families import make_family
from .fit import FitError, FittedModel, InnerNonConvergence, fit
from .inference import predict, simulate, summarize
from .model import Linear, ModelSpec, Smooth, linear, smooth
from .returnlevels import (annual_cdf, gev_return_level,
                           gpd_return_level, qev)
from .serialize import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "ModelSpec", "Smooth", "Linear", "smooth", "linear",
    "fit", "FittedModel", "FitError", "InnerNonConvergence",
    "make_family",
    "predict", "simulate", "summarize",
    "qev", "annual_cdf", "gev_return_level", "gpd_return_level",
    "extremal_index", "ExtremalIndexEstimate", "block_maxima",
    "threshold_excesses", "r_largest",
    "save_model", "load_model",
    "__version__",
]
