"""Deterministic PCA as the spread maximum-likelihood solution, and the
bounded spread likelihood of a single Gaussian datapoint."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError
from .numerics import as_matrix, eigh_sym, make_rng


@dataclass
class PpcaModel:
    """x = F z + gamma * eps with z ~ N(0, I_Z).

    ``eigenvalues`` and ``eigenvectors`` are the leading Z eigenpairs of the
    data covariance used in the fit; the rotation R is fixed to identity.
    """

    F: np.ndarray
    gamma: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def rotation(self):
        return np.eye(self.F.shape[1])


def sample_covariance(data):
    """Mean-centred covariance with 1/N normalisation."""
    x = as_matrix(data, "data")
    if x.shape[0] < 2:
        raise ValidationError("need at least two datapoints")
    xc = x - x.mean(axis=0)
    return xc.T @ xc / x.shape[0]


def fit_spread_pca(data, z_dim, sigma2):
    """Fit the gamma = 0 linear latent model by spread maximum likelihood.

    Spreading with N(0, sigma2 I) noise inflates the covariance to
    S + sigma2 I; the spread model N(0, F F^T + sigma2 I) is then PPCA with a
    known noise floor, solved by the leading eigenpairs of the inflated
    matrix with sigma2 subtracted back off the eigenvalues.
    """
    if not sigma2 > 0:
        raise ValidationError(f"sigma2 must be positive, got {sigma2}")
    cov = sample_covariance(data)
    if not 1 <= z_dim <= cov.shape[0]:
        raise ValidationError(f"z_dim must lie in [1, {cov.shape[0]}], got {z_dim}")
    lam, vec = eigh_sym(cov + sigma2 * np.eye(cov.shape[0]))
    lam_z = lam[:z_dim] - sigma2
    tol = 1e-10 * max(1.0, float(lam[0]))
    if np.any(lam_z <= tol):
        raise ValidationError(
            f"covariance has fewer than {z_dim} positive eigenvalues "
            f"(smallest deflated value {lam_z.min():.3g})")
    U = vec[:, :z_dim]
    return PpcaModel(U * np.sqrt(lam_z), 0.0, lam_z, U)


def classical_pca(data, z_dim):
    """Top-Z loadings U sqrt(Lambda) straight from the sample covariance."""
    lam, vec = np.linalg.eigh(sample_covariance(data))
    order = np.argsort(lam)[::-1][:z_dim]
    return vec[:, order] * np.sqrt(lam[order])


def align_signs(F, ref):
    """Flip columns of F to agree in sign with ``ref`` column-by-column."""
    s = np.sign(np.sum(F * ref, axis=0))
    s[s == 0] = 1.0
    return F * s


def principal_angles(F, G):
    """Principal angles (radians) between the column spaces of F and G."""
    qf, _ = np.linalg.qr(F)
    qg, _ = np.linalg.qr(G)
    s = np.linalg.svd(qf.T @ qg, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def spread_bounded_likelihood_demo(x, sigma_f2, n_y, seed=0, y=None):
    """Spread MLE of N(mu, s2) from one datapoint.

    Draws ``n_y`` spread samples y ~ N(x, sigma_f2) and returns the MLE
    (mean, max(0, var - sigma_f2)) together with the per-sample spread
    log-likelihood, which stays finite.  Passing ``y`` skips the draw.
    """
    if not sigma_f2 > 0:
        raise ValidationError("sigma_f2 must be positive")
    if y is None:
        if n_y < 2:
            raise ValidationError("need at least two spread samples")
        y = x + math.sqrt(sigma_f2) * make_rng(seed).standard_normal(int(n_y))
    y = np.asarray(y, dtype=float)
    mu = float(y.mean())
    var = float(np.mean((y - mu) ** 2))
    s2 = max(0.0, var - sigma_f2)
    total = s2 + sigma_f2
    loglik = -0.5 * math.log(total) - var / (2.0 * total)
    return {"mu_hat": mu, "sigma2_hat": s2, "loglik_per_sample": loglik}
