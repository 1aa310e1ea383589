"""Variational lower bounds on the spread log-likelihood of a delta-VAE.

Every bound has the form

    H(q(z|y)) + <log p(z)> + <log p(y | g(z))>

with the encoder fed a spread version y of the datum x.  All randomness
enters through a :class:`NoiseDraw`, so the same draw can be replayed to
compare variants at matched noise or to freeze the noise for finite
difference checks.
"""

from dataclasses import dataclass
import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import UnsupportedCombination, ValidationError
from ..kernels import LAPLACE, StationaryKernel
from ..numerics import LOG_2PI, make_rng
from .model import (FixedGaussianSpread, FixedLaplaceSpread, LowRankSpread,
                    MeanTransformSpread)


@dataclass
class NoiseDraw:
    """Standardised noise for one bound evaluation.

    ``eps_x`` (B, D) drives the spread of the data (unit Gaussian, or unit
    Laplace for the Laplace family), ``eps`` (B, Z) drives the encoder's
    reparameterisation, ``z_r`` (B, R) is the low-rank component and
    ``eps_x2`` an independent spread draw used for the entropy and prior
    terms when they are not shared with the reconstruction.
    """

    eps_x: np.ndarray
    eps: np.ndarray
    z_r: np.ndarray = None
    eps_x2: np.ndarray = None


def _batch(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValidationError(f"expected data of shape (B, {dim}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("data contains non-finite values")
    return x


def draw_noise(model, batch_size, rng, share_noise=True):
    """Draw a :class:`NoiseDraw` for ``batch_size`` datapoints.

    The order of draws is fixed (eps_x, eps, z_r, eps_x2) so a seed always
    produces the same noise for the same model shape.
    """
    rng = make_rng(rng)
    B, D, Z = int(batch_size), model.x_dim, model.z_dim
    if isinstance(model.spread, FixedLaplaceSpread):
        def spread_draw():
            return StationaryKernel(LAPLACE, 1.0).draw((B, D), rng)
    else:
        def spread_draw():
            return rng.standard_normal((B, D))
    eps_x = spread_draw()
    eps = rng.standard_normal((B, Z))
    z_r = None
    if isinstance(model.spread, LowRankSpread):
        z_r = rng.standard_normal((B, model.spread.rank))
    eps_x2 = None if share_noise else spread_draw()
    return NoiseDraw(eps_x, eps, z_r, eps_x2)


def _resolve_noise(model, x, rng, noise, share_noise=True):
    if noise is None:
        return draw_noise(model, x.shape[0], 0 if rng is None else rng, share_noise)
    if noise.eps_x.shape != x.shape or noise.eps.shape != (x.shape[0], model.z_dim):
        raise ValidationError("noise draw does not match the batch")
    return noise


def _reduce(per_datum, reduce):
    if reduce == "mean":
        return per_datum.mean()
    if reduce == "none":
        return per_datum
    raise ValidationError(f"unknown reduction {reduce!r}")


def encode(model, y, eps):
    """Reparameterised latent draw z = mu(y) + exp(logvar(y)/2) * eps."""
    mu = model.enc_mean(y)
    logvar = model.enc_logvar(y)
    return mu + (logvar * 0.5).exp() * eps, logvar


def entropy_and_prior(z, logvar):
    """Per-datum Gaussian encoder entropy plus standard-normal log prior."""
    entropy = ((logvar + (1.0 + LOG_2PI)) * 0.5).sum(axis=-1)
    prior = ((z.square() + LOG_2PI) * -0.5).sum(axis=-1)
    return entropy + prior


def _gaussian_recon(residual, sigma, variance_reduced):
    D = residual.shape[-1]
    out = residual.square().sum(axis=-1) * (-0.5 / sigma ** 2) \
        - 0.5 * D * (LOG_2PI + 2.0 * math.log(sigma))
    if variance_reduced:
        # <|eps_x|^2> / 2 = D / 2, integrated out analytically
        out = out - 0.5 * D
    return out


def _entropy_prior_term(model, x, z, logvar, noise, sigma):
    if noise.eps_x2 is None:
        return entropy_and_prior(z, logvar)
    y2 = Tensor(x + sigma * noise.eps_x2)
    z2, logvar2 = encode(model, y2, noise.eps)
    return entropy_and_prior(z2, logvar2)


def elbo_fixed_gaussian(model, x, rng=None, use_variance_reduced=True, noise=None,
                        share_noise=True, reduce="mean"):
    """Bound for fixed N(0, sigma^2 I) spread noise.

    With ``y = x + sigma eps_x`` and ``z = h(y, eps)``:

    naive form
        log N(y | g(z), sigma^2 I) + H + log p(z).
    variance-reduced form
        -|x - g(z)|^2 / (2 sigma^2) - D/2 log(2 pi sigma^2) - D/2 + H + log p(z),
        i.e. the noise term |eps_x|^2 / 2 replaced by its mean and the
        reconstruction measured against x.

    The naive form also carries the cross term -eps_x . (x - g(z)) / sigma.
    Its mean is E[tr d g(h(y, eps)) / dy] (Stein's identity), which vanishes
    only when the decoded latent does not depend on y; the two forms
    therefore agree in expectation exactly when the encoder ignores its
    input, and otherwise differ by that trace.

    ``share_noise=False`` evaluates the entropy and prior terms on an
    independent spread draw; both choices give a valid bound.
    """
    spread = model.spread
    if not isinstance(spread, FixedGaussianSpread):
        if use_variance_reduced:
            raise UnsupportedCombination(
                "the variance-reduced bound needs fixed Gaussian spread noise, "
                f"got {type(spread).__name__}")
        raise UnsupportedCombination(
            f"elbo_fixed_gaussian needs FixedGaussianSpread, got {type(spread).__name__}")
    x = _batch(x, model.x_dim)
    noise = _resolve_noise(model, x, rng, noise, share_noise)
    sigma = spread.sigma
    y = Tensor(x + sigma * noise.eps_x)
    z, logvar = encode(model, y, noise.eps)
    g = model.decoder(z)
    target = x if use_variance_reduced else y
    recon = _gaussian_recon(g * -1.0 + target, sigma, use_variance_reduced)
    ep = _entropy_prior_term(model, x, z, logvar, noise, sigma)
    return _reduce(recon + ep, reduce)


def elbo_laplace(model, x, rng=None, noise=None, share_noise=True, reduce="mean"):
    """Naive bound for fixed Laplace spread noise with scale b.

    y = x + b * lap, reconstruction sum_d -|y_d - g_d(z)| / b - log(2 b).
    """
    spread = model.spread
    if not isinstance(spread, FixedLaplaceSpread):
        raise UnsupportedCombination(
            f"elbo_laplace needs FixedLaplaceSpread, got {type(spread).__name__}")
    x = _batch(x, model.x_dim)
    noise = _resolve_noise(model, x, rng, noise, share_noise)
    b = spread.b
    y = Tensor(x + b * noise.eps_x)
    z, logvar = encode(model, y, noise.eps)
    g = model.decoder(z)
    D = model.x_dim
    recon = (y - g).abs().sum(axis=-1) * (-1.0 / b) - D * math.log(2.0 * b)
    ep = _entropy_prior_term(model, x, z, logvar, noise, b)
    return _reduce(recon + ep, reduce)


def _lowrank_terms(spread):
    """Tape values for the Woodbury pieces of sigma2 I + U U^T."""
    U, s2 = spread.U, spread.sigma2
    R = spread.rank
    cap = (U.T @ U) * (1.0 / s2) + np.eye(R)
    return U, s2, ad.inv(cap), ad.logdet(cap)


def lowrank_gaussian_logpdf(r, spread):
    """Per-row log N(r | 0, sigma2 I + U U^T) on the tape (Woodbury)."""
    U, s2, cap_inv, cap_logdet = _lowrank_terms(spread)
    D = r.shape[-1]
    t = r @ U
    quad = r.square().sum(axis=-1) * (1.0 / s2) - ((t @ cap_inv) * t).sum(axis=-1) * (1.0 / s2 ** 2)
    logdet = cap_logdet + D * math.log(s2)
    return quad * -0.5 - 0.5 * D * LOG_2PI + logdet * -0.5


def elbo_lowrank(model, x, rng=None, noise=None, variance_reduced=False,
                 share_noise=True, reduce="mean"):
    """Bound for learned N(0, sigma2 I + U U^T) spread noise.

    The spread sample is y = x + U z_r + sqrt(sigma2) eps_x.  In the default
    naive form the reconstruction is log N(y | g(z), Sigma_psi); with
    ``variance_reduced=True`` it is measured against x with the mean of the
    noise quadratic, D/2, subtracted instead.  With U = 0 the naive form
    coincides with :func:`elbo_fixed_gaussian` at sigma = sqrt(sigma2).
    """
    spread = model.spread
    if not isinstance(spread, LowRankSpread):
        raise UnsupportedCombination(
            f"elbo_lowrank needs LowRankSpread, got {type(spread).__name__}")
    x = _batch(x, model.x_dim)
    noise = _resolve_noise(model, x, rng, noise, share_noise)
    if noise.z_r is None or noise.z_r.shape != (x.shape[0], spread.rank):
        raise ValidationError("low-rank bound needs a z_r draw of shape (B, R)")
    sigma = math.sqrt(spread.sigma2)
    y = Tensor(x + sigma * noise.eps_x) + Tensor(noise.z_r) @ spread.U.T
    z, logvar = encode(model, y, noise.eps)
    g = model.decoder(z)
    if variance_reduced:
        recon = lowrank_gaussian_logpdf(g * -1.0 + x, spread) - 0.5 * model.x_dim
    else:
        recon = lowrank_gaussian_logpdf(y - g, spread)
    if noise.eps_x2 is None:
        ep = entropy_and_prior(z, logvar)
    else:
        y2 = Tensor(x + sigma * noise.eps_x2) + Tensor(noise.z_r) @ spread.U.T
        z2, lv2 = encode(model, y2, noise.eps)
        ep = entropy_and_prior(z2, lv2)
    return _reduce(recon + ep, reduce)


def elbo_mean_transform(model, x, rng=None, noise=None, variance_reduced=True,
                        share_noise=True, reduce="mean"):
    """Bound for spread noise N(y | f(x), sigma^2 I), f = id + g_psi.

    The variance-reduced form feeds the encoder x + sigma eps_x and measures
    the residual f(x) - f(g(z)) in transformed space; with g_psi = 0 it is
    :func:`elbo_fixed_gaussian` in its variance-reduced form.  The naive
    form samples y = f(x) + sigma eps_x and scores log N(y | f(g(z)), sigma^2 I).
    """
    spread = model.spread
    if not isinstance(spread, MeanTransformSpread):
        raise UnsupportedCombination(
            f"elbo_mean_transform needs MeanTransformSpread, got {type(spread).__name__}")
    x = _batch(x, model.x_dim)
    noise = _resolve_noise(model, x, rng, noise, share_noise)
    sigma = spread.sigma
    if variance_reduced:
        y = Tensor(x + sigma * noise.eps_x)
        target = spread.transform(x)
    else:
        y = spread.transform(x) + sigma * noise.eps_x
        target = y
    z, logvar = encode(model, y, noise.eps)
    fg = spread.transform(model.decoder(z))
    recon = _gaussian_recon(target - fg, sigma, variance_reduced)
    if noise.eps_x2 is None:
        ep = entropy_and_prior(z, logvar)
    else:
        y2 = Tensor(x + sigma * noise.eps_x2) if variance_reduced else \
            spread.transform(x) + sigma * noise.eps_x2
        z2, lv2 = encode(model, y2, noise.eps)
        ep = entropy_and_prior(z2, lv2)
    return _reduce(recon + ep, reduce)


def elbo(model, x, rng=None, noise=None, variance_reduced=False, share_noise=True,
         reduce="mean"):
    """Dispatch to the bound matching ``model.spread``.

    The naive form is the default: it is a bound on log p~(y) for every
    sampled y, so its maximiser in expectation is the spread maximum
    likelihood solution.  The variance-reduced form lacks the cross term
    E[tr d g(h(y, eps)) / dy], which is positive for a working
    autoencoder; as a training objective it therefore also rewards a
    small Jacobian and shrinks the learned map.
    """
    s = model.spread
    kw = dict(rng=rng, noise=noise, share_noise=share_noise, reduce=reduce)
    vr = bool(variance_reduced)
    if isinstance(s, FixedGaussianSpread):
        return elbo_fixed_gaussian(model, x, use_variance_reduced=vr, **kw)
    if isinstance(s, FixedLaplaceSpread):
        if vr:
            raise UnsupportedCombination("no variance-reduced bound for Laplace spread noise")
        return elbo_laplace(model, x, **kw)
    if isinstance(s, LowRankSpread):
        return elbo_lowrank(model, x, variance_reduced=vr, **kw)
    return elbo_mean_transform(model, x, variance_reduced=vr, **kw)


def noise_entropy(spread, dim):
    """Differential entropy of the spread noise, on the tape where learned.

    Only the low-rank family has a learned scale; for the others the value
    is constant in psi.
    """
    if isinstance(spread, LowRankSpread):
        _, s2, _, cap_logdet = _lowrank_terms(spread)
        return (cap_logdet + dim * math.log(s2)) * 0.5 + 0.5 * dim * (1.0 + LOG_2PI)
    if isinstance(spread, FixedLaplaceSpread):
        return Tensor(dim * (1.0 + math.log(2.0 * spread.b)))
    return Tensor(0.5 * dim * (1.0 + LOG_2PI + 2.0 * math.log(spread.sigma)))


def spread_objective(model, x, rng=None, noise=None, variance_reduced=False,
                     share_noise=True):
    """Estimated spread divergence that the noise parameters ascend.

    KL(p~_data || p~_model) = -H(p~_data) - <log p~_model>.  The data term
    is replaced by the noise entropy (a lower bound on H(p~_data) that is
    tight as the noise dominates) and the model term by the negative bound,
    giving -bound - H(noise).  Without the entropy term the low-rank
    covariance could raise the objective by inflating U alone.
    Returns (objective, bound) tape values.
    """
    bound = elbo(model, x, rng, noise, variance_reduced, share_noise)
    return bound * -1.0 - noise_entropy(model.spread, model.x_dim), bound
