"""Spread-EM for deterministic linear ICA.

The model is x = A z (+ gamma * noise) with independent unit-variance
Laplace sources.  Standard EM freezes when gamma = 0: its M-step returns the
current mixing matrix.  Spreading the data with Gaussian noise, y = x +
sigma * eps, turns the E-step into a posterior proportional to
N(z | mu(y), Sigma) * prod_i p(z_i), and the moments the M-step needs are
estimated by self-normalised importance sampling with that Gaussian as the
proposal.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import TrainingDiverged, ValidationError
from .kernels import LAPLACE, StationaryKernel
from .numerics import as_matrix, make_rng

LAPLACE_SCALE = 1.0 / math.sqrt(2.0)  # unit variance
# fixed chunking keeps the reduction order, and so the result, seed-stable
CHUNK_ROWS = 256
SHARED_CHUNK_ROWS = 512


@dataclass
class IcaDataset:
    x: np.ndarray
    A_true: np.ndarray = None

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def x_dim(self):
        return self.x.shape[1]


@dataclass
class IcaEmConfig:
    sigma: object = "auto"
    s_y: int = 1
    s_z: int = 1000
    iterations: int = 500
    seed: int = 0
    gamma: float = 0.0
    proposals: str = "shared"

    def __post_init__(self):
        if self.s_y < 1 or self.s_z < 1:
            raise ValidationError("s_y and s_z must be at least 1")
        if self.iterations < 0:
            raise ValidationError("iterations must be non-negative")
        if self.gamma < 0:
            raise ValidationError("gamma must be non-negative")
        if self.proposals not in ("shared", "independent"):
            raise ValidationError(f"unknown proposal scheme {self.proposals!r}")
        if self.sigma != "auto":
            self.sigma = float(self.sigma)
            if not self.sigma > 0:
                raise ValidationError("sigma must be positive or 'auto'")


def check_mixing(A):
    A = as_matrix(A, "A")
    X, Z = A.shape
    if X < Z:
        raise ValidationError(f"need X >= Z, got A of shape {A.shape}")
    smin = float(np.min(np.linalg.svd(A.T @ A, compute_uv=False)))
    if smin <= 1e-10:
        raise ValidationError("A is not full column rank")
    return A


def random_mixing(x_dim, z_dim, rng):
    """Entries drawn uniformly from {-1, +1}, redrawn until full column rank."""
    rng = make_rng(rng)
    while True:
        A = rng.choice([-1.0, 1.0], size=(x_dim, z_dim))
        if np.linalg.matrix_rank(A) == z_dim:
            return A


def generate_ica_data(A_true, n, gamma, seed):
    A = check_mixing(A_true)
    rng = make_rng(seed)
    X, Z = A.shape
    z = StationaryKernel(LAPLACE, LAPLACE_SCALE).draw((n, Z), rng)
    x = z @ A.T
    if gamma > 0:
        x = x + gamma * rng.standard_normal((n, X))
    return IcaDataset(x, A.copy())


def auto_sigma(A):
    """max(0.001, 2.5 * sqrt(mean(A A^T)))."""
    return max(0.001, 2.5 * math.sqrt(float(np.mean(A @ A.T))))


def spread_posterior_params(A, gamma, sigma, y):
    """Gaussian factor of the spread posterior: mean (A^T A)^{-1} A^T y and
    covariance (gamma^2 + sigma^2) (A^T A)^{-1}."""
    A = check_mixing(A)
    G = A.T @ A
    y = np.asarray(y, dtype=float)
    mu = np.linalg.solve(G, A.T @ y.T).T
    cov = (gamma ** 2 + sigma ** 2) * np.linalg.inv(G)
    return mu, cov


def laplace_log_prior(z):
    return np.sum(-np.abs(z) / LAPLACE_SCALE - math.log(2.0 * LAPLACE_SCALE), axis=-1)


def importance_weights(log_target):
    """Normalise log weights along the last axis with log-sum-exp."""
    m = np.max(log_target, axis=-1, keepdims=True)
    w = np.exp(log_target - m)
    return w / w.sum(axis=-1, keepdims=True)


def is_moments(A, y, noise_var, s_z, rng, proposals="shared"):
    """Importance-sampled <y z^T> and <z z^T> averaged over the rows of y.

    Each row gets ``s_z`` proposals from N(mu(y), noise_var (A^T A)^{-1}),
    weighted by the Laplace prior and normalised per row.  With
    ``proposals="shared"`` the zero-mean offsets are drawn once per call and
    shifted by every mu(y) (common random numbers across rows); with
    ``"independent"`` every row draws its own.  Both give each row exact
    proposal draws; the shared scheme avoids an N * s_z * Z sampling cost.
    """
    if proposals not in ("shared", "independent"):
        raise ValidationError(f"unknown proposal scheme {proposals!r}")
    rng = make_rng(rng)
    G = A.T @ A
    L = np.linalg.cholesky(G)
    # rows of eps @ C have covariance noise_var * G^{-1}
    C = math.sqrt(noise_var) * np.linalg.inv(L)
    m, Z = y.shape[0], A.shape[1]
    yz = np.zeros((y.shape[1], Z))
    zz = np.zeros((Z, Z))
    if proposals == "shared":
        E = rng.standard_normal((s_z, Z)) @ C
        mass = np.zeros(s_z)
        for lo in range(0, m, SHARED_CHUNK_ROWS):
            yc = y[lo:lo + SHARED_CHUNK_ROWS]
            mu = np.linalg.solve(G, A.T @ yc.T).T
            absum = np.abs(mu[:, 0, None] + E[None, :, 0])
            for k in range(1, Z):
                absum += np.abs(mu[:, k, None] + E[None, :, k])
            w = importance_weights(-absum / LAPLACE_SCALE)
            ebar = w @ E
            yz += yc.T @ (mu + ebar)
            # sum_s w (mu + e)(mu + e)^T, with the e e^T part deferred
            zz += mu.T @ mu + mu.T @ ebar + ebar.T @ mu
            mass += w.sum(axis=0)
        zz += (E * mass[:, None]).T @ E
        return yz / m, zz / m
    for lo in range(0, m, CHUNK_ROWS):
        yc = y[lo:lo + CHUNK_ROWS]
        mu = np.linalg.solve(G, A.T @ yc.T).T
        z = mu[:, None, :] + rng.standard_normal((yc.shape[0], s_z, Z)) @ C
        w = importance_weights(laplace_log_prior(z))
        zbar = np.einsum("ms,msz->mz", w, z)
        yz += yc.T @ zbar
        zw = z * w[..., None]
        zz += zw.reshape(-1, Z).T @ z.reshape(-1, Z)
    return yz / m, zz / m


def _m_step(xz, zz):
    # A = <x z^T> <z z^T>^{-1}, with <z z^T> symmetric
    try:
        return np.linalg.solve(zz, xz.T).T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("<z z^T> is singular") from exc


def standard_em_step(A, data, gamma, s_z=1000, rng=None, proposals="shared"):
    """One EM update on the unspread data.

    For gamma = 0 the posterior is a point mass at the least-squares source
    estimate; for gamma > 0 the posterior moments are importance sampled
    exactly as in the spread step, but with y = x and no added noise.
    """
    A = check_mixing(A)
    x = data.x if isinstance(data, IcaDataset) else as_matrix(data, "data")
    n = x.shape[0]
    if gamma == 0:
        z = np.linalg.solve(A.T @ A, A.T @ x.T).T
        return _m_step(x.T @ z / n, z.T @ z / n)
    xz, zz = is_moments(A, x, gamma ** 2, s_z, make_rng(0 if rng is None else rng), proposals)
    return _m_step(xz, zz)


def spread_em_step(A, data, cfg, rng):
    """One spread-EM update: spread the data, importance sample, M-step."""
    A = check_mixing(A)
    rng = make_rng(rng)
    x = data.x if isinstance(data, IcaDataset) else as_matrix(data, "data")
    sigma = auto_sigma(A) if cfg.sigma == "auto" else cfg.sigma
    y = np.repeat(x, cfg.s_y, axis=0)
    y = y + sigma * rng.standard_normal(y.shape)
    yz, zz = is_moments(A, y, cfg.gamma ** 2 + sigma ** 2, cfg.s_z, rng, cfg.proposals)
    return _m_step(yz, zz)


def align_columns(A_est, A_true):
    """Permute and sign-flip columns of A_est to best match A_true.

    Pairs are chosen greedily by largest absolute cosine similarity.
    """
    A_est, A_true = as_matrix(A_est), as_matrix(A_true)
    ne = A_est / np.linalg.norm(A_est, axis=0, keepdims=True)
    nt = A_true / np.linalg.norm(A_true, axis=0, keepdims=True)
    cos = nt.T @ ne
    score = np.abs(cos)
    out = np.empty_like(A_true)
    for _ in range(A_true.shape[1]):
        i, j = np.unravel_index(np.argmax(score), score.shape)
        out[:, i] = math.copysign(1.0, cos[i, j]) * A_est[:, j]
        score[i, :] = -1.0
        score[:, j] = -1.0
    return out


def relative_error(A_est, A_true):
    """Mean of |A_est_ij - A_true_ij| / |A_true_ij| after column alignment."""
    aligned = align_columns(A_est, A_true)
    return float(np.mean(np.abs(aligned - A_true) / np.abs(A_true)))


@dataclass
class IcaResult:
    A_est: np.ndarray
    error_trace: list = field(default_factory=list)


def run_spread_em(data, z_dim, cfg, algo="spread", A_init=None, divergence_limit=1e3):
    """Iterate spread (or standard) EM from a uniform [-1, 1] initialisation.

    ``error_trace[k]`` is the relative error after k updates (entry 0 is the
    initial guess) and is empty when the dataset carries no ground truth.
    """
    if algo not in ("spread", "standard"):
        raise ValidationError(f"unknown algorithm {algo!r}")
    rng = make_rng(cfg.seed)
    if A_init is None:
        A = rng.uniform(-1.0, 1.0, size=(data.x_dim, z_dim))
    else:
        A = as_matrix(A_init, "A_init").copy()
    truth = data.A_true
    trace = []
    if truth is not None:
        trace.append(relative_error(A, truth))
    for _ in range(cfg.iterations):
        if algo == "spread":
            A = spread_em_step(A, data, cfg, rng)
        else:
            A = standard_em_step(A, data, cfg.gamma, cfg.s_z, rng, cfg.proposals)
        if not np.all(np.isfinite(A)):
            raise TrainingDiverged("mixing matrix became non-finite", trace, A)
        if truth is not None:
            err = relative_error(A, truth)
            trace.append(err)
            if err > divergence_limit:
                raise TrainingDiverged(f"relative error {err:.3g} exceeded limit", trace, A)
    return IcaResult(A, trace)
