"""delta-VAE model: deterministic decoder, Gaussian encoder, spread noise."""

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..errors import ValidationError
from ..kernels import (GAUSSIAN, LAPLACE, LowRankGaussianNoise, MeanTransformNoise,
                       StationaryKernel, spectral_norm, spectral_normalize)
from ..numerics import make_rng
from .nets import Mlp


@dataclass
class FixedGaussianSpread:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")

    def params(self):
        return []

    def named_params(self):
        return []

    def noise(self):
        return StationaryKernel(GAUSSIAN, self.sigma)


@dataclass
class FixedLaplaceSpread:
    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValidationError("Laplace scale must be positive")

    def params(self):
        return []

    def named_params(self):
        return []

    def noise(self):
        return StationaryKernel(LAPLACE, self.b)


@dataclass
class LowRankSpread:
    """Gaussian spread with covariance sigma2 I + U U^T; U is learned."""

    sigma2: float
    U: Tensor

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValidationError("sigma2 must be positive")
        if not isinstance(self.U, Tensor):
            self.U = Tensor(self.U, requires_grad=True)
        if self.U.ndim != 2:
            raise ValidationError("U must be a D x R matrix")

    @classmethod
    def init(cls, dim, rank, sigma2, scale=0.1, rng=0):
        return cls(sigma2, Tensor(scale * make_rng(rng).standard_normal((dim, rank)),
                                  requires_grad=True))

    @property
    def rank(self):
        return self.U.shape[1]

    def params(self):
        return [self.U]

    def named_params(self):
        return [("spread.U", self.U)]

    def noise(self):
        return LowRankGaussianNoise(self.sigma2, self.U.value.copy())


@dataclass
class MeanTransformSpread:
    """N(y | f(x), sigma^2 I) with f(x) = x + W2 tanh(W1 x + b1) + b2.

    Weights are kept at spectral norm ``c`` by :meth:`renormalize`, which
    the trainer calls after every spread update.
    """

    sigma: float
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    c: float = 0.9

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if not 0.0 < self.c < 1.0:
            raise ValidationError("Lipschitz cap must lie in (0, 1)")
        for name in ("W1", "b1", "W2", "b2"):
            v = getattr(self, name)
            if not isinstance(v, Tensor):
                setattr(self, name, Tensor(v, requires_grad=True))

    @classmethod
    def init(cls, dim, sigma, hidden=None, c=0.9, rng=0):
        n = MeanTransformNoise.init(dim, hidden or dim, StationaryKernel(GAUSSIAN, sigma), c, rng)
        return cls(sigma, n.W1, n.b1, n.W2, n.b2, c)

    @classmethod
    def identity(cls, dim, sigma, hidden=None, c=0.9):
        n = MeanTransformNoise.identity(dim, StationaryKernel(GAUSSIAN, sigma), hidden, c)
        return cls(sigma, n.W1, n.b1, n.W2, n.b2, c)

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def named_params(self):
        return [("spread.W1", self.W1), ("spread.b1", self.b1),
                ("spread.W2", self.W2), ("spread.b2", self.b2)]

    def transform(self, x):
        """f(x) on the tape for row-batched x."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        return x + ((x @ self.W1.T + self.b1).tanh() @ self.W2.T + self.b2)

    def renormalize(self):
        for W in (self.W1, self.W2):
            if np.any(W.value):
                W.value = spectral_normalize(W.value, self.c)

    def max_spectral_norm(self):
        return max(spectral_norm(self.W1.value), spectral_norm(self.W2.value))

    def noise(self):
        return MeanTransformNoise(StationaryKernel(GAUSSIAN, self.sigma), self.W1.value.copy(),
                                  self.b1.value.copy(), self.W2.value.copy(),
                                  self.b2.value.copy(), self.c)


SPREAD_TYPES = (FixedGaussianSpread, FixedLaplaceSpread, LowRankSpread, MeanTransformSpread)


class DVaeModel:
    """Deterministic decoder g: Z -> X with a diagonal Gaussian encoder.

    The encoder has separate mean and log-variance networks; the prior on z
    is standard normal.
    """

    def __init__(self, decoder, enc_mean, enc_logvar, spread):
        if decoder.sizes[0] != enc_mean.sizes[-1] or enc_mean.sizes[-1] != enc_logvar.sizes[-1]:
            raise ValidationError("latent sizes of encoder and decoder disagree")
        if decoder.sizes[-1] != enc_mean.sizes[0] or enc_mean.sizes[0] != enc_logvar.sizes[0]:
            raise ValidationError("data sizes of encoder and decoder disagree")
        if not isinstance(spread, SPREAD_TYPES):
            raise ValidationError(f"unsupported spread {type(spread).__name__}")
        self.decoder = decoder
        self.enc_mean = enc_mean
        self.enc_logvar = enc_logvar
        self.spread = spread

    @classmethod
    def build(cls, x_dim, z_dim, spread, hidden=(32, 32), activation="tanh", seed=0):
        rng = make_rng(seed)
        h = tuple(hidden)
        dec = Mlp((z_dim,) + h + (x_dim,), activation, rng)
        mean = Mlp((x_dim,) + h + (z_dim,), activation, rng)
        logvar = Mlp((x_dim,) + h + (z_dim,), activation, rng)
        # start the encoder with small variances
        W, b = logvar.layers[-1]
        W.value *= 0.1
        b.value[:] = -2.0
        return cls(dec, mean, logvar, spread)

    @property
    def x_dim(self):
        return self.decoder.sizes[-1]

    @property
    def z_dim(self):
        return self.decoder.sizes[0]

    def model_params(self):
        return self.decoder.params + self.enc_mean.params + self.enc_logvar.params

    def spread_params(self):
        return self.spread.params()

    def named_params(self):
        yield from self.decoder.named_params("decoder")
        yield from self.enc_mean.named_params("enc_mean")
        yield from self.enc_logvar.named_params("enc_logvar")
        yield from self.spread.named_params()

    def get_flat(self):
        return np.concatenate([p.value.ravel() for _, p in self.named_params()])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        i = 0
        for _, p in self.named_params():
            n = p.size
            p.value = flat[i:i + n].reshape(p.shape).copy()
            i += n
        if i != flat.size:
            raise ValidationError("flat parameter vector has the wrong length")

    def param_rows(self):
        """(tensor, index, value) rows; index is row-major within the tensor."""
        for name, p in self.named_params():
            for k, v in enumerate(p.value.ravel()):
                yield name, k, float(v)

    def generate(self, z):
        return self.decoder(z).value
