"""delta-VAE: spread maximum likelihood for deterministic-decoder models."""

from .bounds import (NoiseDraw, draw_noise, elbo, elbo_fixed_gaussian, elbo_laplace,
                     elbo_lowrank, elbo_mean_transform, noise_entropy, spread_objective)
from .model import (DVaeModel, FixedGaussianSpread, FixedLaplaceSpread, LowRankSpread,
                    MeanTransformSpread)
from .nets import Mlp
from .perturbation import perturbation_expectation
from .toy2d import Toy2dResult, Toy2dSpec, toy2d_experiment
from .train import PRESETS, TrainConfig, TrainResult, parse_schedule, preset, train_dvae

__all__ = [
    "NoiseDraw", "draw_noise", "elbo", "elbo_fixed_gaussian", "elbo_laplace",
    "elbo_lowrank", "elbo_mean_transform", "noise_entropy", "spread_objective",
    "DVaeModel", "FixedGaussianSpread", "FixedLaplaceSpread", "LowRankSpread",
    "MeanTransformSpread", "Mlp", "perturbation_expectation", "Toy2dResult",
    "Toy2dSpec", "toy2d_experiment", "PRESETS", "TrainConfig", "TrainResult",
    "parse_schedule", "preset", "train_dvae",
]
