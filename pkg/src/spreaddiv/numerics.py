"""Dense linear algebra and sampling helpers shared by the rest of the package.

Random streams come from numpy's PCG64 bit generator (a fixed, documented
128-bit LCG with an XSL-RR output permutation).  Seeding it with the same
integer gives the same raw stream on every platform, which is what the
determinism tests rely on.
"""

import math

import numpy as np

from .errors import ConvergenceError, ValidationError

LOG_2PI = math.log(2.0 * math.pi)


def make_rng(seed):
    """Return a PCG64-backed generator for ``seed`` (a non-negative int)."""
    if isinstance(seed, np.random.Generator):
        return seed
    seed = int(seed)
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def as_matrix(m, name="matrix"):
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def as_vector(x, name="vector"):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {a.shape}")
    return a


def _offdiag_norm(a):
    return float(np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2)))


def eigh_sym(m, max_sweeps=100, sym_tol=1e-10):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Symmetric input.  Relative asymmetry above ``sym_tol`` is rejected.
    max_sweeps : int
        Cap on full sweeps over the off-diagonal pairs.

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
        Sorted in descending order.
    eigenvectors : ndarray, shape (n, n)
        Column ``i`` pairs with ``eigenvalues[i]``; columns are orthonormal.
    """
    a = as_matrix(m, "m")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValidationError(f"m must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if n else 1.0
    if n and np.max(np.abs(a - a.T)) > sym_tol * scale:
        raise ValidationError("m is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    total = float(np.sqrt(np.sum(a * a)))
    for _ in range(max_sweeps):
        off = _offdiag_norm(a)
        if off <= 1e-15 * total:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300 + 1e-18 * total:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = _offdiag_norm(a)
        if off > 1e-12 * total:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps", detail=off)
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def gaussian_logpdf_diag(x, mean, variances):
    """Log-density of a diagonal Gaussian, summed over coordinates."""
    x = as_vector(x, "x")
    mean = as_vector(mean, "mean")
    var = as_vector(variances, "variances")
    if not (x.shape == mean.shape == var.shape):
        raise ValidationError(
            f"dimension mismatch: x {x.shape}, mean {mean.shape}, variances {var.shape}")
    if np.any(var <= 0):
        raise ValidationError("variances must be strictly positive")
    r = x - mean
    return float(-0.5 * np.sum(r * r / var + np.log(var) + LOG_2PI))


def gaussian_logpdf_dense(y, mean, cov):
    """Log-density of N(mean, cov) via Cholesky; the dense reference path."""
    y = as_vector(y, "y")
    mean = as_vector(mean, "mean")
    cov = as_matrix(cov, "cov")
    chol = np.linalg.cholesky(cov)
    r = np.linalg.solve(chol, y - mean)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * (r @ r + logdet + y.size * LOG_2PI))


def gaussian_kl(mean_p, cov_p, mean_q, cov_q):
    """KL(N(mean_p, cov_p) || N(mean_q, cov_q)) in closed form."""
    mp, mq = as_vector(mean_p), as_vector(mean_q)
    cp, cq = as_matrix(cov_p), as_matrix(cov_q)
    try:
        lp = np.linalg.cholesky(cp)
        lq = np.linalg.cholesky(cq)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("covariance is not positive definite") from exc
    d = mp.size
    lq_inv_lp = np.linalg.solve(lq, lp)
    trace = float(np.sum(lq_inv_lp ** 2))
    r = np.linalg.solve(lq, mq - mp)
    logdet_q = 2.0 * np.sum(np.log(np.diag(lq)))
    logdet_p = 2.0 * np.sum(np.log(np.diag(lp)))
    return 0.5 * (trace + float(r @ r) - d + logdet_q - logdet_p)


def logsumexp(a, axis=None):
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
