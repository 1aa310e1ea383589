"""Spread divergences and the estimators built on them.

Subpackages and modules
-----------------------
numerics     RNG, symmetric eigensolver, Gaussian densities.
autodiff     Reverse-mode tape used by the trainers.
kernels      Stationary, discrete, low-rank and mean-transform spread noise.
divergences  Exact discrete and Gaussian spread divergences.
ica          Spread-EM for deterministic linear ICA.
pca          PCA as the spread maximum-likelihood solution.
dvae         delta-VAE bounds, trainer and the 2-D toy.
harness      Config format and canned experiments behind the CLI.
"""

__version__ = "0.1.0"

from .errors import (ConvergenceError, SpreadDivError, TrainingDiverged,
                     UnsupportedCombination, ValidationError)

__all__ = ["__version__", "ConvergenceError", "SpreadDivError", "TrainingDiverged",
           "UnsupportedCombination", "ValidationError"]
