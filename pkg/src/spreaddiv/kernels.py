"""Spread-noise families p(y|x): stationary kernels, low-rank Gaussians,
mean-transform noise and discrete spread matrices.

Every family supports sampling; the continuous ones also evaluate log
densities.  Objects are immutable once built and can be shared between
threads; sampling takes a caller-owned generator.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConvergenceError, ValidationError
from .numerics import LOG_2PI, as_matrix, as_vector, make_rng

GAUSSIAN = "gaussian"
LAPLACE = "laplace"
FAMILIES = (GAUSSIAN, LAPLACE)


@dataclass(frozen=True)
class StationaryKernel:
    """Translation-invariant noise p(y|x) = K(y - x), applied per coordinate.

    ``scale`` is the standard deviation for the Gaussian and the Laplace
    scale ``b`` (density exp(-|u|/b) / 2b) for the Laplace family.
    """

    family: str
    scale: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError(f"kernel scale must be positive, got {self.scale}")

    def density(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == GAUSSIAN:
            s2 = self.scale ** 2
            return np.exp(-0.5 * u * u / s2) / math.sqrt(2.0 * math.pi * s2)
        b = self.scale
        return np.exp(-np.abs(u) / b) / (2.0 * b)

    def logpdf(self, y, x):
        """Sum over coordinates of log K(y_i - x_i)."""
        u = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        if self.family == GAUSSIAN:
            s2 = self.scale ** 2
            return np.sum(-0.5 * (u * u / s2 + math.log(s2) + LOG_2PI), axis=-1)
        b = self.scale
        return np.sum(-np.abs(u) / b - math.log(2.0 * b), axis=-1)

    def fourier(self, omega):
        """Analytic Fourier transform of K at ``omega``.

        Gaussian: exp(-s^2 w^2 / 2).  Laplace: sqrt(2/pi) b^-1 / (b^-2 + w^2),
        which is the unitary transform of the unnormalised exp(-|u|/b); it is
        a positive multiple of the characteristic function 1 / (1 + b^2 w^2).
        """
        w = np.asarray(omega, dtype=float)
        if self.family == GAUSSIAN:
            return np.exp(-0.5 * self.scale ** 2 * w * w)
        b = self.scale
        return math.sqrt(2.0 / math.pi) * (1.0 / b) / (b ** -2 + w * w)

    def draw(self, shape, rng):
        rng = make_rng(rng)
        if self.family == GAUSSIAN:
            return self.scale * rng.standard_normal(shape)
        # inverse CDF of the Laplace law from uniforms on (-1/2, 1/2)
        u = rng.random(shape) - 0.5
        return -self.scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x + self.draw(x.shape, rng)


def kernel_mass_on_grid(k, half_width=None, n=200001):
    """Numerically integrate K over a symmetric grid (trapezoid rule)."""
    if half_width is None:
        half_width = 40.0 * k.scale
    u = np.linspace(-half_width, half_width, n)
    return float(np.trapezoid(k.density(u), u))


@dataclass(frozen=True)
class ValidityReport:
    positive_density: bool
    ft_condition: str
    omegas: np.ndarray = field(repr=False)
    transform: np.ndarray = field(repr=False)

    @property
    def valid(self):
        return self.positive_density and self.ft_condition != "fails"

    def as_lines(self):
        lines = [
            f"positive_density={str(self.positive_density).lower()}",
            f"ft_condition={self.ft_condition}",
            f"valid={str(self.valid).lower()}",
        ]
        for w, f in zip(self.omegas, self.transform):
            lines.append(f"ft({w:.17g})={f:.17g}")
        return lines


def check_stationary_validity(k, omegas=None):
    """Check the two sufficient conditions for a stationary spread.

    The density must be strictly positive, and its Fourier transform may
    vanish on at most a countable set.  Both built-in families have
    closed-form transforms that are strictly positive, so the answer is
    analytic; ``omegas`` only controls which transform values are reported.
    """
    if omegas is None:
        omegas = np.linspace(-5.0, 5.0, 11)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    transform = np.atleast_1d(k.fourier(omegas))
    # both closed forms are strictly positive for every finite omega
    return ValidityReport(True, "nonvanishing", omegas, transform)


@dataclass(frozen=True)
class DiscreteSpread:
    """Column-stochastic matrix with P[i, j] = p(y=i | x=j)."""

    P: np.ndarray

    def __post_init__(self):
        P = as_matrix(self.P, "P")
        if P.shape[0] != P.shape[1]:
            raise ValidationError(f"P must be square, got {P.shape}")
        if np.any(P < 0):
            raise ValidationError("P has negative entries")
        if np.max(np.abs(P.sum(axis=0) - 1.0)) > 1e-12:
            raise ValidationError("columns of P must sum to 1")
        object.__setattr__(self, "P", P)

    @property
    def n(self):
        return self.P.shape[0]

    def apply(self, p):
        return self.P @ np.asarray(p, dtype=float)


def check_discrete_spread(P):
    """Return ``{"injective": bool, "support_complete": bool}`` for P."""
    spread = P if isinstance(P, DiscreteSpread) else DiscreteSpread(P)
    det = abs(float(np.linalg.det(spread.P)))
    return {
        "injective": det > 1e-12 * spread.n,
        "support_complete": bool(np.min(spread.P) > 0),
    }


@dataclass(frozen=True)
class LowRankGaussianNoise:
    """Gaussian noise with covariance sigma2 * I + U U^T.

    Densities use the Woodbury identity so only the R x R capacitance
    matrix I + U^T U / sigma2 is ever factorised.
    """

    sigma2: float
    U: np.ndarray

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2}")
        U = as_matrix(self.U, "U")
        if U.shape[1] > U.shape[0]:
            raise ValidationError(f"rank {U.shape[1]} exceeds dimension {U.shape[0]}")
        object.__setattr__(self, "U", U)

    @property
    def dim(self):
        return self.U.shape[0]

    @property
    def rank(self):
        return self.U.shape[1]

    def covariance(self):
        return self.sigma2 * np.eye(self.dim) + self.U @ self.U.T

    def _capacitance(self):
        return np.eye(self.rank) + self.U.T @ self.U / self.sigma2

    def precision(self):
        """Sigma^{-1} = I/s2 - U (s2 I + U^T U)^{-1} U^T / s2."""
        s2 = self.sigma2
        m = self._capacitance()
        return np.eye(self.dim) / s2 - self.U @ np.linalg.solve(m, self.U.T) / s2 ** 2

    def logdet(self):
        sign, ld = np.linalg.slogdet(self._capacitance())
        return float(ld) + self.dim * math.log(self.sigma2)

    def logpdf(self, y, x):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        if y.shape[-1] != self.dim or x.shape[-1] != self.dim:
            raise ValidationError(
                f"dimension mismatch: expected {self.dim}, got y {y.shape}, x {x.shape}")
        r = y - x
        s2 = self.sigma2
        proj = r @ self.U / s2
        chol = np.linalg.cholesky(self._capacitance())
        w = np.linalg.solve(chol, proj.T).T if proj.ndim > 1 else np.linalg.solve(chol, proj)
        quad = np.sum(r * r, axis=-1) / s2 - np.sum(w * w, axis=-1)
        return -0.5 * (quad + self.logdet() + self.dim * LOG_2PI)

    def draw(self, n, rng):
        """``n`` zero-mean draws U z + sigma eps, shape (n, D)."""
        rng = make_rng(rng)
        z = rng.standard_normal((n, self.rank))
        eps = rng.standard_normal((n, self.dim))
        return z @ self.U.T + math.sqrt(self.sigma2) * eps

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return x + self.draw(1, rng)[0]
        return x + self.draw(x.shape[0], rng)


def lowrank_logpdf(noise, y, x):
    return noise.logpdf(as_vector(y, "y"), as_vector(x, "x"))


def lowrank_sample(noise, x, rng):
    return noise.sample(x, rng)


def spectral_norm(w, max_iter=1000, tol=1e-12, seed=0):
    """Largest singular value by power iteration on w^T w."""
    w = as_matrix(w, "w")
    if not np.any(w):
        return 0.0
    v = make_rng(seed).standard_normal(w.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        u = w @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            # start vector landed in the null space; reseed deterministically
            v = np.ones(w.shape[1]) / math.sqrt(w.shape[1])
            continue
        v = w.T @ (u / nu)
        new = np.linalg.norm(v)
        v /= new
        if abs(new - sigma) <= tol * new:
            sigma = new
            break
        sigma = new
    return float(sigma)


def spectral_normalize(w, c, **kw):
    """Rescale ``w`` so its spectral norm is exactly ``c``."""
    if not 0.0 < c < 1.0:
        raise ValidationError(f"Lipschitz cap must lie in (0, 1), got {c}")
    w = as_matrix(w, "w")
    s = spectral_norm(w, **kw)
    if s == 0.0:
        return np.zeros_like(w)
    return c * w / s


@dataclass(frozen=True)
class MeanTransformNoise:
    """p(y|x) = K(y - f(x)) with f = id + g and g a contractive residual block.

    The residual block is ``g(x) = W2 tanh(W1 x + b1) + b2``.  After
    normalisation both weights have spectral norm ``c`` < 1, so
    Lip(g) <= c^2 < 1 and f is injective.
    """

    base: StationaryKernel
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    c: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValidationError(f"Lipschitz cap must lie in (0, 1), got {self.c}")
        W1, W2 = as_matrix(self.W1, "W1"), as_matrix(self.W2, "W2")
        b1, b2 = as_vector(self.b1, "b1"), as_vector(self.b2, "b2")
        if W2.shape[1] != W1.shape[0] or W2.shape[0] != W1.shape[1]:
            raise ValidationError("residual block must map R^D back to R^D")
        if b1.shape[0] != W1.shape[0] or b2.shape[0] != W2.shape[0]:
            raise ValidationError("bias shapes do not match weights")
        for name, arr in (("W1", W1), ("b1", b1), ("W2", W2), ("b2", b2)):
            object.__setattr__(self, name, arr)

    @classmethod
    def init(cls, dim, hidden, base, c=0.9, rng=0, normalize=True):
        rng = make_rng(rng)
        W1 = rng.standard_normal((hidden, dim)) / math.sqrt(dim)
        W2 = rng.standard_normal((dim, hidden)) / math.sqrt(hidden)
        if normalize:
            W1, W2 = spectral_normalize(W1, c), spectral_normalize(W2, c)
        return cls(base, W1, np.zeros(hidden), W2, np.zeros(dim), c)

    @classmethod
    def identity(cls, dim, base, hidden=None, c=0.9):
        h = dim if hidden is None else hidden
        return cls(base, np.zeros((h, dim)), np.zeros(h), np.zeros((dim, h)), np.zeros(dim), c)

    @property
    def dim(self):
        return self.W1.shape[1]

    def normalized(self):
        """Copy with every non-zero weight rescaled to spectral norm c."""
        return MeanTransformNoise(
            self.base,
            spectral_normalize(self.W1, self.c) if np.any(self.W1) else self.W1,
            self.b1,
            spectral_normalize(self.W2, self.c) if np.any(self.W2) else self.W2,
            self.b2,
            self.c,
        )

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        return np.tanh(x @ self.W1.T + self.b1) @ self.W2.T + self.b2

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return x + self.residual(x)

    def invert(self, y, tol=1e-12, max_iter=1000):
        """Solve y = x + g(x) by the contraction x <- y - g(x)."""
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for _ in range(max_iter):
            nxt = y - self.residual(x)
            if np.max(np.abs(nxt - x)) <= tol:
                return nxt
            x = nxt
        raise ConvergenceError(
            f"fixed-point inversion did not converge in {max_iter} iterations",
            detail=float(np.max(np.abs(self.apply(x) - y))))

    def sample(self, x, rng):
        return self.base.sample(self.apply(x), rng)


def mean_transform_apply(noise, x):
    return noise.apply(x)


def mean_transform_invert(noise, y, max_iter=1000):
    return noise.invert(y, max_iter=max_iter)


def spread_sample(noise, x, rng):
    """One draw of y ~ p(y|x) for any continuous noise family."""
    if isinstance(noise, (StationaryKernel, LowRankGaussianNoise, MeanTransformNoise)):
        return noise.sample(x, rng)
    raise ValidationError(f"unsupported noise model {type(noise).__name__}")
