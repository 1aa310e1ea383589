"""Second-order approximation of a Gaussian expectation.

For xi ~ N(0, Sigma), <f(x + xi)> ~= f(x) + tr(Sigma H) / 2 with H the
Hessian of f at x.  The approximation is exact for quadratics.
"""

import numpy as np

from ..autodiff import Tensor, grad_of
from ..errors import ValidationError
from ..numerics import as_matrix, as_vector, make_rng

METHODS = ("fd", "hvp")


def _value(f, x):
    out = f(Tensor(x))
    return float(out.value if isinstance(out, Tensor) else out)


def _gradient(f, x):
    p = Tensor(x.copy(), requires_grad=True)
    _, (g,) = grad_of(lambda: f(p), [p])
    return g


def hessian_fd(f, x, step):
    """Central second differences of function values (4 evaluations per pair)."""
    n = x.size
    H = np.empty((n, n))
    E = np.eye(n) * step
    for i in range(n):
        for j in range(i, n):
            h = (_value(f, x + E[i] + E[j]) - _value(f, x + E[i] - E[j])
                 - _value(f, x - E[i] + E[j]) + _value(f, x - E[i] - E[j])) / (4.0 * step * step)
            H[i, j] = H[j, i] = h
    return H


def hessian_vector_product(f, x, v, step):
    """H v from a central difference of tape gradients along v."""
    return (_gradient(f, x + step * v) - _gradient(f, x - step * v)) / (2.0 * step)


def perturbation_expectation(f, x, cov, method="fd", step=None, n_probes=None, rng=None):
    """Approximate <f(x + xi)>, xi ~ N(0, cov), by f(x) + tr(cov H) / 2.

    Parameters
    ----------
    f : callable
        Maps a :class:`~spreaddiv.autodiff.Tensor` of shape (D,) to a scalar
        (a Tensor, or a float for ``method="fd"``).
    x : array_like, shape (D,)
    cov : array_like, shape (D, D) or scalar for D = 1
    method : {"fd", "hvp"}
        ``"fd"`` builds H from central differences of f (meant for D <= 10).
        ``"hvp"`` uses Hessian-vector products from differences of tape
        gradients: exactly along the eigenvectors of cov, or with
        ``n_probes`` random probes xi ~ N(0, cov) giving the unbiased
        estimate mean(xi^T H xi).
    step : float, optional
        Finite-difference step; defaults to 1e-2 * max(1, |x|_inf).
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    x = as_vector(x, "x")
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    cov = as_matrix(cov, "cov")
    if cov.shape != (x.size, x.size):
        raise ValidationError(f"cov must be {x.size} x {x.size}, got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValidationError("cov must be symmetric")
    base = _value(f, x)
    if not np.any(cov):
        return base
    if step is None:
        step = 1e-2 * max(1.0, float(np.max(np.abs(x))))
    if method == "fd":
        return base + 0.5 * float(np.sum(cov * hessian_fd(f, x, step)))
    lam, vec = np.linalg.eigh(cov)
    if lam.min() < -1e-10 * max(1.0, lam.max()):
        raise ValidationError("cov must be positive semi-definite")
    lam = np.clip(lam, 0.0, None)
    if n_probes is None:
        trace = 0.0
        for k in range(x.size):
            if lam[k] > 0:
                v = vec[:, k]
                trace += lam[k] * float(v @ hessian_vector_product(f, x, v, step))
        return base + 0.5 * trace
    rng = make_rng(rng)
    xis = rng.standard_normal((int(n_probes), x.size)) @ (vec * np.sqrt(lam)).T
    quad = [float(xi @ hessian_vector_product(f, x, xi, step)) for xi in xis]
    return base + 0.5 * float(np.mean(quad))
