"""Exact divergences between discrete distributions and their spread,
mixture and affine variants, plus the Gaussian closed forms.

KL between distributions whose supports do not nest has no value here; it
is returned as the :data:`UNDEFINED` sentinel rather than raised, so that
sweeps and tables can carry it through.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConvergenceError, ValidationError
from .kernels import DiscreteSpread, StationaryKernel, check_discrete_spread
from .numerics import as_matrix, as_vector, gaussian_kl, make_rng

KL = "kl"
TV = "tv"
KINDS = (KL, TV)


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "undefined"

    __str__ = __repr__

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


def is_undefined(value):
    return value is UNDEFINED


def as_dist(p, name="p", tol=1e-12):
    """Validate a probability vector and return it as a float array."""
    p = as_vector(p, name)
    if np.any(p < 0):
        raise ValidationError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValidationError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def _check_kind(kind):
    if kind not in KINDS:
        raise ValidationError(f"unknown divergence kind {kind!r}; expected one of {KINDS}")


def f_divergence(kind, p, q):
    """KL(p||q) = sum p log(p/q), or TV(p||q) = sum |p - q| (no 1/2 factor).

    KL is :data:`UNDEFINED` when p puts mass where q has none.
    """
    _check_kind(kind)
    p, q = as_dist(p, "p"), as_dist(q, "q")
    if p.shape != q.shape:
        raise ValidationError(f"length mismatch: {p.size} vs {q.size}")
    if kind == TV:
        return float(np.sum(np.abs(p - q)))
    mask = p > 0
    if np.any(q[mask] == 0):
        return UNDEFINED
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def f_divergence_generic(f, p, q):
    """<f(p/q)>_q for a convex f with f(1) = 0; needs q > 0 everywhere."""
    p, q = as_dist(p, "p"), as_dist(q, "q")
    if np.any(q == 0):
        return UNDEFINED
    return float(np.sum(q * f(p / q)))


@dataclass(frozen=True)
class SpreadResult:
    value: float
    injective: bool
    support_complete: bool


def spread_f_divergence_discrete(kind, p, q, P):
    """f-divergence between P p and P q.

    The result carries the injectivity flag of P: with a non-injective P
    a zero divergence no longer implies p == q.
    """
    spread = P if isinstance(P, DiscreteSpread) else DiscreteSpread(P)
    p, q = as_dist(p, "p"), as_dist(q, "q")
    flags = check_discrete_spread(spread)
    value = f_divergence(kind, _renorm(spread.apply(p)), _renorm(spread.apply(q)))
    return SpreadResult(value, flags["injective"], flags["support_complete"])


def _renorm(p):
    # P p sums to 1 up to rounding; snap it so as_dist accepts it
    return p / p.sum()


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


def mixture_divergence_discrete(kind, p, q, n, alpha):
    """Divergence between alpha p + (1-alpha) n and alpha q + (1-alpha) n."""
    _check_alpha(alpha)
    p, q, n = as_dist(p, "p"), as_dist(q, "q"), as_dist(n, "n")
    if np.any(n <= 0):
        raise ValidationError("noise distribution n must be strictly positive")
    return f_divergence(kind, _renorm(alpha * p + (1 - alpha) * n),
                        _renorm(alpha * q + (1 - alpha) * n))


def affine_divergence_discrete(kind, p, q, P, n, alpha):
    """Divergence between alpha P p + (1-alpha) n and alpha P q + (1-alpha) n."""
    _check_alpha(alpha)
    spread = P if isinstance(P, DiscreteSpread) else DiscreteSpread(P)
    p, q, n = as_dist(p, "p"), as_dist(q, "q"), as_dist(n, "n")
    pt, qt = spread.apply(p), spread.apply(q)
    return f_divergence(kind, _renorm(alpha * pt + (1 - alpha) * n),
                        _renorm(alpha * qt + (1 - alpha) * n))


def gaussian_spread_kl(mu_p, mu_q, sigma2):
    """Spread KL between two point masses under N(0, sigma2 I) noise."""
    if not sigma2 > 0:
        raise ValidationError(f"sigma2 must be positive, got {sigma2}")
    d = np.atleast_1d(np.asarray(mu_p, dtype=float)) - np.atleast_1d(np.asarray(mu_q, dtype=float))
    return float(d @ d) / (2.0 * sigma2)


@dataclass(frozen=True)
class DpiResult:
    before: object
    after: float
    holds: bool


def dpi_check(kind, p, q, P, tol=1e-10):
    before = f_divergence(kind, p, q)
    after = spread_f_divergence_discrete(kind, p, q, P).value
    if is_undefined(before) or not math.isfinite(before):
        return DpiResult(before, after, True)
    return DpiResult(before, after, after <= before + tol)


# -- linear-subspace toy -----------------------------------------------------

@dataclass(frozen=True)
class SubspacePair:
    """Two degenerate Gaussians a + A z and b + B z spread by
    N(0, sigma2 I + u u^T) noise with unit-norm u."""

    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    sigma2: float
    u: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "u"):
            object.__setattr__(self, name, as_vector(getattr(self, name), name))
        for name in ("A", "B"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        X = self.a.size
        if not (self.b.size == self.u.size == X and self.A.shape[0] == X and self.B.shape[0] == X):
            raise ValidationError("subspace pair dimensions disagree")
        if abs(np.linalg.norm(self.u) - 1.0) > 1e-10:
            raise ValidationError("u must have unit norm")
        if not self.sigma2 > 0:
            raise ValidationError("sigma2 must be positive")

    @property
    def dim(self):
        return self.a.size

    def noise_cov(self, u=None):
        u = self.u if u is None else u
        return self.sigma2 * np.eye(self.dim) + np.outer(u, u)

    def with_u(self, u):
        return SubspacePair(self.a, self.b, self.A, self.B, self.sigma2, u)

    def optimal_normal(self):
        """Normalised (A A^T + sigma2 I)^{-1} (b - a); None when b == a."""
        v = np.linalg.solve(self.A @ self.A.T + self.sigma2 * np.eye(self.dim), self.b - self.a)
        n = np.linalg.norm(v)
        return None if n == 0 else v / n


def subspace_spread_kl(s):
    """KL(N(a, AA^T + Sigma) || N(b, BB^T + Sigma)), Sigma = sigma2 I + u u^T."""
    noise = s.noise_cov()
    return gaussian_kl(s.a, s.A @ s.A.T + noise, s.b, s.B @ s.B.T + noise)


@dataclass
class NoiseDirectionResult:
    u: np.ndarray
    dot: float
    steps: int
    degenerate: bool = False
    trace: list = field(default_factory=list, repr=False)


def optimize_noise_direction(s, steps=2000, lr=0.05, seed=0, tol=1e-4, u0=None):
    """Projected gradient ascent of the subspace spread KL over unit u.

    Requires A == B, where the objective is (b-a)^T (M + u u^T)^{-1} (b-a) / 2
    with M = A A^T + sigma2 I and gradient -(u.w) w, w = (M + u u^T)^{-1}(b-a).
    The step is scaled by 1/|w|^2 so the contraction rate of u.w does not
    depend on the problem's scale.

    ``trace`` holds (step, kl, |u . v_hat|) rows.
    """
    if not np.allclose(s.A, s.B, rtol=0.0, atol=1e-12):
        raise ValidationError("optimize_noise_direction assumes A == B")
    if u0 is None:
        u = make_rng(seed).standard_normal(s.dim)
    else:
        u = as_vector(u0, "u0").copy()
    u /= np.linalg.norm(u)
    v_hat = s.optimal_normal()
    if v_hat is None:
        return NoiseDirectionResult(u, 0.0, 0, degenerate=True,
                                    trace=[(0, 0.0, 0.0)])
    M = s.A @ s.A.T + s.sigma2 * np.eye(s.dim)
    d = s.b - s.a
    trace = []
    step = 0
    for step in range(steps + 1):
        w = np.linalg.solve(M + np.outer(u, u), d)
        dot = abs(float(u @ v_hat))
        trace.append((step, 0.5 * float(d @ w), dot))
        if dot <= 1e-13 or step == steps:
            break
        g = -(u @ w) * w
        g -= (g @ u) * u
        u = u + lr * g / float(w @ w)
        u /= np.linalg.norm(u)
    dot = abs(float(u @ v_hat))
    if dot > tol:
        raise ConvergenceError(
            f"noise direction did not converge in {steps} steps (|u.v|={dot:.3g})",
            detail=dot)
    return NoiseDirectionResult(u, dot, step, trace=trace)


# -- MMD / spread TV on a grid ----------------------------------------------

def discretize_kernel(k, spacing, half_width=None):
    """Kernel masses on the offsets -m*h..m*h, renormalised to sum to 1."""
    if half_width is None:
        half_width = 10.0 * k.scale
    m = int(math.ceil(half_width / spacing))
    offsets = spacing * np.arange(-m, m + 1)
    w = k.density(offsets)
    return w / w.sum()


def mmd_vs_spread_tvd_grid(p, q, kernel, spacing=1.0):
    """Smooth p - q with the kernel and measure it in L2 and L1.

    ``p`` and ``q`` hold probability masses on a uniform grid with the given
    spacing.  Returns the L2 norm of the smoothed density difference (the
    MMD proxy, up to the kernel's constant) and its L1 norm (spread TV).
    """
    p, q = as_dist(p, "p"), as_dist(q, "q")
    if p.shape != q.shape:
        raise ValidationError("p and q must live on the same grid")
    if isinstance(kernel, StationaryKernel):
        kernel = discretize_kernel(kernel, spacing)
    kernel = as_vector(kernel, "kernel")
    d = np.convolve(p - q, kernel, mode="full")
    return {
        "mmd_proxy": float(np.sqrt(np.sum(d * d) / spacing)),
        "spread_tvd": float(np.sum(np.abs(d))),
    }


# -- spread MLE ----------------------------------------------------------------

def spread_mle_objective(samples, model_logpdf):
    """Negative mean model log-density over spread samples.

    ``model_logpdf`` is called once on the whole (N, ...) sample array and
    must return N log-densities.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] == 0:
        raise ValidationError("spread MLE objective needs at least one sample")
    values = np.asarray(model_logpdf(samples), dtype=float).reshape(-1)
    if values.size != samples.shape[0]:
        raise ValidationError("model_logpdf must return one value per sample")
    return float(-np.mean(values))
